"""Quasi-free (Gaussian) states of the free-fermion ring and their correlators.

A state is fixed by a momentum occupation ``n(k)`` on the ring momenta
``k_j = 2πj/R``, ``j = -⌊R/2⌋+1, ..., ⌈R/2⌉`` (so ``+π`` is included and
``-π`` is not for even ``R``).  With ``c_x = R^{-1/2} Σ_k e^{ikx} c_k`` the
two-point function is

    G_xy = ω(c_x^* c_y) = (1/R) Σ_k n(k) e^{-ik(x-y)},

the dispersion of ``h_{x,x+1} = -t(c_{x+1}^* c_x + c_x^* c_{x+1}) - μ n_x`` is
``ε(k) = -2t cos k - μ`` and annihilators evolve as
``c_y(t) = Σ_z U_yz(t) c_z`` with ``U(t) = e^{-iht}``.

Operators are quadratic forms ``Σ a_uv c_u^* c_v + const``
(:class:`Quadratic`).  Everything here is written in the fermion language;
the spin picture lives in :mod:`nesscurrent.models`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import DomainError

__all__ = [
    "Occupation",
    "OneParticleData",
    "Quadratic",
    "momenta",
    "boosted_fermi",
    "is_sharp",
    "fermi_dirac",
    "uniform_occupation",
    "current_expectation",
    "density",
    "hopping_bond",
    "current_op",
    "energy_current_op",
    "region_hamiltonian",
    "region_charge",
    "expect",
    "wick_two_time",
    "commutator_expect",
    "bond_correlations",
]


def momenta(R: int) -> np.ndarray:
    j = np.arange(-((R - 1) // 2), R // 2 + 1)  # (-π, π]
    return 2 * np.pi * j / R


@dataclass(frozen=True, eq=False)
class Occupation:
    """Momentum occupation ``n(k)`` of a ring of ``R`` sites with hopping ``t`` and chemical potential ``mu``."""

    R: int
    n: np.ndarray
    t: float = 1.0
    mu: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        if n.shape != (self.R,):
            raise DomainError(f"occupation needs {self.R} entries, got {n.shape}")
        if np.any(n < -1e-15) or np.any(n > 1 + 1e-15):
            raise DomainError("occupations must lie in [0, 1]")
        n = np.clip(n, 0.0, 1.0)
        n.setflags(write=False)
        object.__setattr__(self, "n", n)

    @property
    def momenta(self) -> np.ndarray:
        return momenta(self.R)

    @property
    def dispersion(self) -> np.ndarray:
        return -2.0 * self.t * np.cos(self.momenta) - self.mu

    @property
    def filling(self) -> float:
        return float(self.n.mean())


def _wrap_index(j: np.ndarray, R: int) -> np.ndarray:
    """Integer momentum labels wrapped into ``(-R/2, R/2]``."""
    return j - R * np.ceil((j - R / 2) / R)


def boosted_fermi(R: int, filling: float, boost: float = 0.0, *, t: float = 1.0, mu: float = 0.0) -> Occupation:
    """Sharp Fermi sea of width ``2πν`` centred at the boost ``φ``.

    ``n(k) = 1`` for ``|k - φ| < πν`` (distance taken around the circle) and
    ``0`` beyond.  A grid momentum sitting exactly on an edge gets ``1/2``:
    when both edges are grid points (e.g. ``φ = 0`` with ``νR`` even) this
    keeps the filling exact and the ``φ = 0`` sea symmetric under ``k → -k``.
    Comparisons are done in units of the momentum spacing.
    """
    if not 0.0 < filling <= 1.0:
        raise DomainError("filling must lie in (0, 1]")
    if filling >= 1.0:
        return Occupation(R, np.ones(R), t, mu, label="full-band")
    j = momenta(R) * R / (2 * np.pi)
    dist = np.abs(_wrap_index(j - boost * R / (2 * np.pi), R))
    half = filling * R / 2
    eps = 1e-9
    n = np.where(dist < half - eps, 1.0, 0.0)
    n[np.abs(dist - half) <= eps] = 0.5
    return Occupation(R, n, t, mu, label=f"boosted-fermi(nu={filling:g}, phi={boost:g})")


def is_sharp(occ: Occupation) -> bool:
    """True when the occupation jumps by more than 1/4 between neighbouring momenta."""
    return bool(np.max(np.abs(np.diff(np.append(occ.n, occ.n[0])))) > 0.25)


def fermi_dirac(R: int, beta: float, boost: float = 0.0, *, t: float = 1.0, mu: float = 0.0) -> Occupation:
    """Smooth boosted occupation ``n(k) = 1/(1 + e^{β ε(k - φ)})``."""
    k = momenta(R)
    e = -2.0 * t * np.cos(k - boost) - mu
    with np.errstate(over="ignore"):
        n = 1.0 / (1.0 + np.exp(beta * e))
    return Occupation(R, n, t, mu, label=f"fermi-dirac(beta={beta:g}, phi={boost:g})")


def uniform_occupation(R: int, value: float = 0.5, *, t: float = 1.0, mu: float = 0.0) -> Occupation:
    """``n(k) = value`` for every ``k`` (``1/2`` is the infinite-temperature state)."""
    return Occupation(R, np.full(R, value), t, mu, label=f"uniform({value:g})")


def current_expectation(occ: Occupation) -> float:
    """``ω(j_{0,1}) = (2t/R) Σ_k sin(k) n(k)``."""
    return float(2.0 * occ.t / occ.R * np.sum(np.sin(occ.momenta) * occ.n))


# ---------------------------------------------------------------------------
# one-particle data


class OneParticleData:
    """Two-point function ``G`` and a cache of propagators ``U(t)`` for one occupation."""

    def __init__(self, occ: Occupation):
        self.occ = occ
        R = occ.R
        k = occ.momenta
        r = np.arange(R)
        g = (np.exp(-1j * np.outer(r, k)) @ occ.n) / R  # g[r] = G_{x, x-r}
        idx = (r[:, None] - r[None, :]) % R
        self.G = g[idx]
        self.Gbar = np.eye(R) - self.G.T  # ω(c_x c_y^*)
        self._phase_r = np.exp(1j * np.outer(r, k))
        self._cache: dict[float, np.ndarray] = {}
        self._idx = idx

    def propagator(self, t: float) -> np.ndarray:
        """``U_xy(t) = (1/R) Σ_k e^{ik(x-y)} e^{-iε(k)t}``."""
        t = float(t)
        U = self._cache.get(t)
        if U is None:
            u = self._phase_r @ np.exp(-1j * self.occ.dispersion * t) / self.occ.R
            U = u[self._idx]
            U.setflags(write=False)
            self._cache[t] = U
        return U

    def precompute(self, ts) -> None:
        for t in ts:
            self.propagator(t)


_ONE_PARTICLE: dict[int, OneParticleData] = {}


def one_particle(occ: Occupation) -> OneParticleData:
    data = _ONE_PARTICLE.get(id(occ))
    if data is None or data.occ is not occ:
        data = OneParticleData(occ)
        _ONE_PARTICLE.clear()
        _ONE_PARTICLE[id(occ)] = data
    return data


# ---------------------------------------------------------------------------
# quadratic operators


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``Σ_{a,b} coeffs[a, b] c^*_{sites[a]} c_{sites[b]} + const`` (sites are ring labels, any integers)."""

    sites: tuple
    coeffs: np.ndarray
    const: complex = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (len(self.sites), len(self.sites)):
            raise DomainError("coefficient matrix does not match the site list")
        if len(set(self.sites)) != len(self.sites):
            raise DomainError("repeated site in a quadratic operator")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "coeffs", c)

    def _union(self, other: "Quadratic") -> tuple[tuple, np.ndarray, np.ndarray]:
        sites = tuple(sorted(set(self.sites) | set(other.sites)))
        pos = {s: i for i, s in enumerate(sites)}
        a = np.zeros((len(sites), len(sites)), dtype=complex)
        b = np.zeros_like(a)
        ia = [pos[s] for s in self.sites]
        ib = [pos[s] for s in other.sites]
        a[np.ix_(ia, ia)] = self.coeffs
        b[np.ix_(ib, ib)] = other.coeffs
        return sites, a, b

    def __add__(self, other: "Quadratic") -> "Quadratic":
        sites, a, b = self._union(other)
        return Quadratic(sites, a + b, self.const + other.const)

    def __sub__(self, other: "Quadratic") -> "Quadratic":
        return self + other.scale(-1)

    def scale(self, c) -> "Quadratic":
        return Quadratic(self.sites, c * self.coeffs, c * self.const)

    def shifted(self, c) -> "Quadratic":
        return Quadratic(self.sites, self.coeffs, self.const + c)

    def translate(self, x: int) -> "Quadratic":
        return Quadratic(tuple(s + x for s in self.sites), self.coeffs, self.const)

    def adjoint(self) -> "Quadratic":
        return Quadratic(self.sites, self.coeffs.conj().T, np.conj(self.const))

    def commutator(self, other: "Quadratic") -> "Quadratic":
        """``[A, B]`` for quadratic forms: coefficient matrix ``[a, b]``, no constant."""
        sites, a, b = self._union(other)
        return Quadratic(sites, a @ b - b @ a)

    def full(self, R: int) -> np.ndarray:
        """``R x R`` coefficient matrix on the ring."""
        m = np.zeros((R, R), dtype=complex)
        idx = [s % R for s in self.sites]
        if len(set(idx)) != len(idx):
            raise DomainError(f"operator does not fit on a ring of {R}")
        m[np.ix_(idx, idx)] = self.coeffs
        return m


def density(x: int) -> Quadratic:
    """``n_x = c_x^* c_x``."""
    return Quadratic((x,), [[1.0]])


def hopping_bond(x: int, t: float = 1.0, mu: float = 0.0) -> Quadratic:
    """``h_{x,x+1} = -t(c_{x+1}^* c_x + c_x^* c_{x+1}) - μ n_x``."""
    return Quadratic((x, x + 1), [[-mu, -t], [-t, 0.0]])


def current_op(x: int, t: float = 1.0) -> Quadratic:
    """``j_{x,x+1} = it(c_{x+1}^* c_x - c_x^* c_{x+1})``."""
    return Quadratic((x, x + 1), [[0.0, -1j * t], [1j * t, 0.0]])


def energy_current_op(x: int, t: float = 1.0, mu: float = 0.0) -> Quadratic:
    """``J_x = i[h_{x-1,x}, h_{x,x+1}]``."""
    return hopping_bond(x - 1, t, mu).commutator(hopping_bond(x, t, mu)).scale(1j)


def region_hamiltonian(a: int, b: int, t: float = 1.0, mu: float = 0.0) -> Quadratic:
    """``H_{[a,b]}``: bonds ``(x, x+1)`` with ``a <= x < b``."""
    sites = tuple(range(a, b + 1))
    m = np.zeros((len(sites), len(sites)), dtype=complex)
    for i in range(len(sites) - 1):
        m[i, i] += -mu
        m[i, i + 1] += -t
        m[i + 1, i] += -t
    return Quadratic(sites, m)


def region_charge(a: int, b: int) -> Quadratic:
    """``N_{[a,b]}``."""
    return Quadratic(tuple(range(a, b + 1)), np.eye(b - a + 1))


# ---------------------------------------------------------------------------
# expectations


def _check(occ: Occupation, *ops) -> None:
    for op in ops:
        if not isinstance(op, Quadratic):
            raise DomainError("Wick evaluation needs quadratic operators")
        span = max(op.sites) - min(op.sites) + 1
        if span > occ.R:
            raise DomainError(f"operator spans {span} sites, more than the ring of {occ.R}")


def expect(occ: Occupation, op: Quadratic) -> complex:
    """``ω(A) = Σ a_uv G_uv + const``."""
    _check(occ, op)
    data = one_particle(occ)
    idx = [s % occ.R for s in op.sites]
    return complex(np.sum(op.coeffs * data.G[np.ix_(idx, idx)]) + op.const)


def wick_two_time(occ: Occupation, a: Quadratic, b: Quadratic, t: float, *, connected: bool = True) -> complex:
    """``ω(Â B̂(t))`` (or ``ω(A B(t))`` with ``connected=False``) by Wick contraction.

    ``ω(c_w^* c_x c_u^*(t) c_v(t))`` minus the product of expectations is
    ``ω(c_w^* c_v(t)) ω(c_x c_u^*(t))`` with
    ``ω(c_w^* c_v(t)) = Σ_z G_wz U_vz(t)`` and
    ``ω(c_x c_u^*(t)) = Σ_y (δ_xy - G_yx) conj(U_uy(t))``.
    """
    _check(occ, a, b)
    data = one_particle(occ)
    R = occ.R
    U = data.propagator(t)
    ia = [s % R for s in a.sites]
    ib = [s % R for s in b.sites]
    c1 = data.G[ia] @ U[ib].T  # c1[w, v]
    c2 = data.Gbar[ia] @ U[ib].conj().T  # c2[x, u]
    val = np.einsum("wx,uv,wv,xu->", a.coeffs, b.coeffs, c1, c2)
    if not connected:
        val = val + expect(occ, a) * expect(occ, b)
    return complex(val)


def commutator_expect(occ: Occupation, a: Quadratic, b: Quadratic, t: float) -> complex:
    """``ω([A, B(t)])`` through the one-body commutator ``[a, U^* b U]``."""
    _check(occ, a, b)
    data = one_particle(occ)
    U = data.propagator(t)
    am = a.full(occ.R)
    bt = U.conj().T @ b.full(occ.R) @ U
    return complex(np.sum((am @ bt - bt @ am) * data.G))


def bond_correlations(occ: Occupation, x: int, ys, t: float, bond: Quadratic | None = None) -> np.ndarray:
    """``ω(n̂_x ĥ_{y,y+1}(t))`` for many bonds ``y`` at once.

    Same contraction as :func:`wick_two_time` with ``A = n_x`` and ``B`` the
    bond at ``y`` (by default the hopping bond of ``occ``), vectorised over ``y``.
    """
    bond = bond if bond is not None else hopping_bond(0, occ.t, occ.mu)
    data = one_particle(occ)
    R = occ.R
    U = data.propagator(t)
    row1 = U @ data.G[x % R]  # ω(c_x^* c_v(t)) for all v
    row2 = U.conj() @ data.Gbar[x % R]  # ω(c_x c_u^*(t)) for all u
    ys = np.asarray(list(ys), dtype=int)
    out = np.zeros(len(ys), dtype=complex)
    for i, si in enumerate(bond.sites):
        for j, sj in enumerate(bond.sites):
            c = bond.coeffs[i, j]
            if c != 0:
                out += c * row1[(ys + sj) % R] * row2[(ys + si) % R]
    return out
