"""Explicit Lieb-Robinson bound, the commutator envelope ``Z_{M,L}(t)``, and measurements.

Support sizes ``dA``, ``dB`` are site counts (``n_x``: 1, ``h``/``j``: 2,
``J``: 3).  With that reading the closed form reproduces every instantiation
used downstream (``(N+1)^4 · 3`` with exponent ``|z| - 4`` for ``n`` against
``J``, ``(N+1)^5 · 6`` with ``M - 5`` for ``j`` against ``J``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ed
from .algebra import DomainError, LatticeGeometry, LocalOperator, commutator, operator_norm, translate
from .models import ModelSpec, charge, current, energy_current, region_charge, region_hamiltonian

__all__ = [
    "group_velocity_constant",
    "LRParams",
    "lr_bound",
    "ConeProfile",
    "cone_profile",
    "fitted_velocity",
    "z_envelope",
    "ZProfile",
    "measure_z_deviation",
    "z_profile",
]

_LOG_MAX = 709.0


def group_velocity_constant(model: ModelSpec) -> float:
    """``V = 4 (N+1)^4 e^2 ||h_{0,1}||``."""
    return 4.0 * model.local_dim**4 * math.e**2 * operator_norm(model.bond)


@dataclass(frozen=True)
class LRParams:
    V: float
    N_plus_1: int
    dA: int
    dB: int
    normA: float
    normB: float

    def __post_init__(self):
        if self.dA < 1 or self.dB < 1:
            raise DomainError("support sizes must be at least 1")

    @classmethod
    def for_operators(cls, model: ModelSpec, a: LocalOperator, b: LocalOperator) -> "LRParams":
        return cls(group_velocity_constant(model), model.local_dim, a.width, b.width, operator_norm(a), operator_norm(b))

    @property
    def prefactor(self) -> float:
        return 2.0 * self.N_plus_1 ** (self.dA + self.dB) * self.normA * self.normB * self.dA * self.dB

    def valid(self, x: int) -> bool:
        return abs(x) - (self.dA + self.dB) > 0


def lr_bound(p: LRParams, x: int, t: float) -> float:
    """Right-hand side of the Lieb-Robinson inequality for ``||[τ_x α_t(A), B]||``.

    ``prefactor · exp(-|t| ((|x| - dA - dB)/|t| - 2V)) = prefactor · e^{-(|x| - dA - dB)} e^{2V|t|}``.
    Returns ``inf`` when the value overflows a double.
    """
    if not p.valid(x):
        raise DomainError(f"|x| - (dA + dB) must be positive (x={x}, dA={p.dA}, dB={p.dB})")
    if p.prefactor == 0.0:
        return 0.0
    log_b = math.log(p.prefactor) - (abs(x) - p.dA - p.dB) + 2.0 * p.V * abs(t)
    return math.exp(log_b) if log_b < _LOG_MAX else math.inf


# ---------------------------------------------------------------------------
# light-cone measurement


@dataclass(frozen=True, eq=False)
class ConeProfile:
    xs: np.ndarray
    ts: np.ndarray
    measured: np.ndarray  # shape (len(xs), len(ts))
    bound: np.ndarray  # nan where the bound does not apply
    valid: np.ndarray
    params: LRParams
    guard: ed.GuardResult | None
    ring: int

    @property
    def violations(self) -> int:
        return int(np.sum(self.valid & (self.measured > self.bound)))

    def rows(self):
        for i, x in enumerate(self.xs):
            for k, t in enumerate(self.ts):
                yield int(x), float(t), float(self.measured[i, k]), float(self.bound[i, k]), bool(self.valid[i, k])


def _ring_spectra(model: ModelSpec):
    """Diagonalize rings of ``model`` on demand, reusing earlier results."""
    cache: dict[int, ed.SpectralData] = {}

    def get(R: int) -> ed.SpectralData:
        if R not in cache:
            cache[R] = ed.diagonalize(model, LatticeGeometry.ring(R, model.local_dim), dim_cap=model.local_dim**R)
        return cache[R]

    return get


def _is_real(*mats) -> bool:
    return all(not np.any(np.iscomplex(np.asarray(m))) for m in mats)


class _ConeColumns:
    """``||[τ_x α_t(A), B]||`` columns, one per (ring, time), computed once.

    At ``t = 0`` the commutator is local and is evaluated exactly in the
    operator algebra.  When ``h``, ``A`` and ``B`` are real matrices, time
    reversal maps ``α_t(A)`` to the complex conjugate of ``α_{-t}(A)``, so
    only ``|t|`` is computed.
    """

    def __init__(self, model: ModelSpec, a: LocalOperator, b: LocalOperator, xs):
        self.model, self.a, self.b = model, a, b
        self.xs = [int(x) for x in xs]
        self.spectra = _ring_spectra(model)
        self.reversible = _is_real(model.bond, a.matrix, b.matrix)
        self._columns: dict = {}
        self._eigen: dict = {}

    def _key(self, R: int, t: float):
        t = float(t)
        if t == 0.0:
            return (None, 0.0)
        return (R, abs(t) if self.reversible else t)

    def column(self, R: int, t: float) -> np.ndarray:
        key = self._key(R, t)
        if key not in self._columns:
            if key[0] is None:
                col = [operator_norm(commutator(translate(self.a, x), self.b)) for x in self.xs]
            else:
                spectral = self.spectra(R)
                if R not in self._eigen:
                    self._eigen[R] = ed.to_eigenbasis(self.a, spectral)
                At = self._eigen[R].evolve(key[1]).product_blocks()
                # on the ring ||[τ_x α_t(A), B]|| = ||[α_t(A), τ_{-x} B]||
                col = [ed.commutator_norm(At, translate(self.b, -x), spectral) for x in self.xs]
            self._columns[key] = np.array(col)
        return self._columns[key]

    def grid(self, R: int, ts) -> np.ndarray:
        return np.stack([self.column(R, t) for t in ts], axis=1)


def cone_profile(
    model: ModelSpec,
    a: LocalOperator,
    b: LocalOperator,
    xs,
    ts,
    *,
    ring: int | None = None,
    guard_tol: float = 1e-6,
    dim_cap: int = ed.DEFAULT_DIM_CAP,
) -> ConeProfile:
    """Measured ``||[τ_x α_t(A), B]||`` on a ring, next to the Lieb-Robinson bound.

    Without an explicit ``ring`` the ring starts at ``2 max|x| + dA + dB - 1``
    sites and is grown by :func:`nesscurrent.ed.guard_ring` on the largest
    ``|t|`` of the grid.
    """
    xs = np.asarray(list(xs), dtype=int)
    ts = np.asarray(list(ts), dtype=float)
    p = LRParams.for_operators(model, a, b)
    columns = _ConeColumns(model, a, b, xs)
    guard = None
    if ring is None:
        start = 2 * int(np.max(np.abs(xs))) + a.width + b.width - 1
        t_max = float(ts[np.argmax(np.abs(ts))])
        guard = ed.guard_ring(lambda R: columns.column(R, t_max), start, model.local_dim, guard_tol, dim_cap)
        ring = guard.ring
    measured = columns.grid(ring, ts)
    valid = np.array([[p.valid(x) for _ in ts] for x in xs], dtype=bool)
    bound = np.full(measured.shape, np.nan)
    for i, x in enumerate(xs):
        if p.valid(x):
            bound[i] = [lr_bound(p, x, t) for t in ts]
    return ConeProfile(xs, ts, measured, bound, valid, p, guard, ring)


def fitted_velocity(profile: ConeProfile, threshold: float = 1e-6) -> float | None:
    """Least-squares front velocity.

    For every ``|x|`` beyond the supports the arrival time is the smallest
    ``|t|`` at which the measured norm reaches ``threshold`` (log-linear
    interpolation between grid times); ``|x|`` is then fitted linearly
    against the arrival times.
    """
    ts = profile.ts
    order = np.argsort(np.abs(ts))
    points = []
    for i, x in enumerate(profile.xs):
        if abs(x) < profile.params.dA + profile.params.dB - 1:
            continue
        tt = np.abs(ts[order])
        vals = profile.measured[i, order]
        hit = np.flatnonzero(vals >= threshold)
        if not hit.size or hit[0] == 0:
            continue
        k = hit[0]
        lo, hi = max(vals[k - 1], 1e-300), vals[k]
        frac = (math.log(threshold) - math.log(lo)) / (math.log(hi) - math.log(lo)) if hi > lo else 1.0
        points.append((tt[k - 1] + frac * (tt[k] - tt[k - 1]), abs(int(x))))
    if len({p[0] for p in points}) < 2:
        return None
    t_arr, dist = np.array(points).T
    slope, _ = np.polyfit(t_arr, dist, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Z_{M,L}(t)


def _growth(V: float, t: float) -> tuple[float, float]:
    """``a = (e^{2V|t|} - 1)/(2V)`` and ``b = (a - |t|)/(2V)`` with their ``V → 0`` limits."""
    t = abs(t)
    x = 2.0 * V * t
    if V == 0.0:
        return t, t * t / 2.0
    a = math.expm1(x) / (2.0 * V) if x < _LOG_MAX else math.inf
    if x < 1e-4:
        b = t * t / 2.0 * (1.0 + x / 3.0 + x * x / 12.0)
    else:
        b = (math.expm1(x) - x) / (4.0 * V * V) if x < _LOG_MAX else math.inf
    return a, b


def z_envelope(model: ModelSpec, M: int, L: int, t: float) -> float:
    """``Z_{M,L}(t)`` bounding ``||[N_{[-L,0]}, H_{[-M,M+1]}(t)] - [N_{[-L,0]}, H_{[-M,M+1]}]||``.

    ``6 (N+1)^4 ||n_0|| ||J_0|| e^{-M}/(1 - e^{-1}) e^3 a(t)
    + 12 e^5 (N+1)^5 ||j_{0,1}|| ||J_0|| (e^{-M} + e^{-(L-M)}) b(t)``
    with ``a``, ``b`` from the time integrals of ``e^{2V|s|}``.
    """
    if L < M or M <= 0:
        raise DomainError(f"need L >= M > 0, got L={L}, M={M}")
    d = model.local_dim
    V = group_velocity_constant(model)
    n0 = operator_norm(charge(model, 0))
    J0 = operator_norm(energy_current(model, 0))
    j01 = operator_norm(current(model, 0))
    a, b = _growth(V, t)
    term1 = 6.0 * d**4 * n0 * J0 * (math.exp(-M) / (1.0 - math.exp(-1.0))) * math.e**3 * a
    term2 = 12.0 * math.e**5 * d**5 * j01 * J0 * (math.exp(-M) + math.exp(-(L - M))) * b
    if term1 == 0.0 and term2 == 0.0:
        return 0.0
    return term1 + term2


@dataclass(frozen=True, eq=False)
class ZProfile:
    L: int
    M: int
    ts: np.ndarray
    measured: np.ndarray
    envelope: np.ndarray
    guard: ed.GuardResult | None
    ring: int

    @property
    def holds(self) -> bool:
        return bool(np.all(self.measured <= self.envelope))


def measure_z_deviation(model: ModelSpec, L: int, M: int, ts, spectral: ed.SpectralData) -> np.ndarray:
    """``||[N_{[-L,0]}, H_{[-M,M+1]}(t) - H_{[-M,M+1]}]||`` on a ring via exact dynamics."""
    offset = L  # put site -L on ring site 0
    N = region_charge(model, (-L, 0))
    H = ed.to_eigenbasis(region_hamiltonian(model, (-M, M + 1)), spectral, offset)
    out = []
    for t in ts:
        X = (H.evolve(t) - H).product_blocks()
        out.append(ed.commutator_norm(X, N, spectral, offset))
    return np.array(out)


def z_profile(
    model: ModelSpec,
    L: int,
    M: int,
    ts,
    *,
    ring: int | None = None,
    guard_tol: float = 1e-6,
    dim_cap: int = 2**13,
) -> ZProfile:
    """Measured commutator deviation against ``Z_{M,L}(t)`` on a guarded ring.

    The guard starts from ``L + 2M + 3`` sites, which leaves ``M + 1`` sites
    between the right edge of ``H_{[-M,M+1]}`` and ``-L`` across the seam.
    """
    ts = np.asarray(list(ts), dtype=float)
    if L < M or M <= 0:
        raise DomainError(f"need L >= M > 0, got L={L}, M={M}")

    spectra = _ring_spectra(model)

    def measure(R, times):
        return measure_z_deviation(model, L, M, times, spectra(R))

    guard = None
    if ring is None:
        start = L + 2 * M + 3
        t_max = float(np.max(np.abs(ts)))
        guard = ed.guard_ring(lambda R: measure(R, [t_max]), start, model.local_dim, guard_tol, dim_cap)
        ring = guard.ring
    measured = measure(ring, ts)
    envelope = np.array([z_envelope(model, M, L, t) for t in ts])
    return ZProfile(L, M, ts, measured, envelope, guard, ring)
