"""Sum rules for the charge-energy correlator of a current-carrying state.

Conventions used throughout:

* ``ρ(z, t) = ω(i n̂_0 ĥ_{-z,-z+1}(-t)) / (2π √(2π))`` with centred operators.
* ``ω(i[n_x, h_{y,y+1}(t)]) = 4π√(2π) Re ρ(x - y, -t)``, so
  ``ω(i[N_{[-L,0]}, H_{[-M,M+1]}(t)]) = 4π√(2π) Σ_z w_{L,M}(z) Re ρ(z, -t)``
  with the overlap count ``w_{L,M}(z) = Σ_x r_L(x) s_M(x - z)``.
* ``f̃(ε) = (2π)^{-1/2} ∫ f(t) e^{iεt} dt``.
* ``ρ̃(k, ε) = (2π)^{-1/2} Σ_z Σ_t Δt w(t) ρ(z, t) e^{-i(kz - εt)}``, the
  rectangle-rule inverse of ``ρ(z,t) = (2π√(2π))^{-1} ∫dε ∫dk ρ̃ e^{i(kz-εt)}``.
  On the DFT grids ``k ∈ 2πℤ/n_k``, ``ε ∈ 2πℤ/(n_t Δt)`` the inverse
  transform is exact.

Time integrals against the window use composite Simpson.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import ed, freefermion as ff
from .algebra import DomainError
from .models import bond as model_bond
from .models import charge as model_charge
from .models import current as model_current
from .models import region_charge as model_region_charge
from .models import region_hamiltonian as model_region_hamiltonian

log = logging.getLogger(__name__)

__all__ = [
    "TestWindow",
    "CorrelationGrid",
    "SpectralDensity",
    "SumRuleResult",
    "TermDecomposition",
    "TheoremResult",
    "overlap_weight",
    "sumrule_integrand",
    "sumrule_integral",
    "term_decomposition",
    "correlation_grid",
    "spectral_density",
    "reconstruct",
    "theorem_sumrule",
    "choose_zmax",
    "worker_count",
]

RHO_NORM = 2.0 * math.pi * math.sqrt(2.0 * math.pi)
MAX_STEP = 0.05


def worker_count() -> int:
    """Thread-pool size from ``NESSCURRENT_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("NESSCURRENT_WORKERS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# test window


@dataclass(frozen=True, eq=False)
class TestWindow:
    """Test function ``f`` supported in ``[-T, T]``, sampled on a uniform grid.

    shape
        ``"gaussian"`` (``e^{-t²/2σ²}`` truncated at ``|t| = T``), ``"hann"``
        (``cos²(πt/2T)``) or ``"custom"`` (``samples`` on the grid).
    """

    __test__ = False  # not a pytest class

    shape: str
    T: float
    dt: float
    sigma: float | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.shape not in ("gaussian", "hann", "custom"):
            raise DomainError(f"unknown window shape {self.shape!r}")
        if self.T <= 0 or self.dt <= 0:
            raise DomainError("window half-width and step must be positive")
        n = round(2 * self.T / self.dt)
        if abs(n * self.dt - 2 * self.T) > 1e-9 * self.T or n % 2:
            raise DomainError(f"2T/dt must be an even integer (T={self.T}, dt={self.dt})")
        limit = MAX_STEP
        if self.shape == "gaussian":
            if self.sigma is None or self.sigma <= 0:
                raise DomainError("gaussian window needs sigma > 0")
            limit = min(self.sigma / 8, MAX_STEP)
            if self.T < 4 * self.sigma - 1e-12:
                log.warning("gaussian window truncated at T < 4 sigma (T=%g, sigma=%g)", self.T, self.sigma)
        if self.dt > limit + 1e-15:
            raise DomainError(f"quadrature grid too coarse: dt={self.dt} > {limit}")
        if self.shape == "custom":
            s = np.asarray(self.samples, dtype=float)
            if s.shape != (n + 1,):
                raise DomainError(f"custom window needs {n + 1} samples")
            object.__setattr__(self, "samples", s)

    @classmethod
    def gaussian(cls, sigma: float, T: float, dt: float) -> "TestWindow":
        return cls("gaussian", T, dt, sigma=sigma)

    @classmethod
    def hann(cls, T: float, dt: float) -> "TestWindow":
        return cls("hann", T, dt)

    @property
    def times(self) -> np.ndarray:
        n = round(2 * self.T / self.dt)
        return -self.T + self.dt * np.arange(n + 1)

    @property
    def values(self) -> np.ndarray:
        t = self.times
        if self.shape == "gaussian":
            return np.exp(-(t**2) / (2 * self.sigma**2))
        if self.shape == "hann":
            return np.cos(np.pi * t / (2 * self.T)) ** 2
        return self.samples

    def integrate(self, g) -> complex | float:
        """``∫ f(t) g(t) dt`` over the grid (Simpson)."""
        return simpson(self.values * np.asarray(g), x=self.times)

    def transform(self, eps) -> np.ndarray:
        """``f̃(ε)`` by Simpson quadrature."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        ph = np.exp(1j * np.outer(eps, self.times))
        return simpson(ph * self.values, x=self.times, axis=1) / math.sqrt(2 * math.pi)

    def transform_at_zero(self) -> float:
        return float(self.integrate(np.ones_like(self.times)) / math.sqrt(2 * math.pi))

    def describe(self) -> dict:
        d = {"shape": self.shape, "T": self.T, "dt": self.dt}
        if self.sigma is not None:
            d["sigma"] = self.sigma
        return d


# ---------------------------------------------------------------------------
# overlap weights


def overlap_weight(L: int | float, M: int, z: int) -> int:
    """``Σ_x r_L(x) s_M(x - z)``: number of ``x ∈ [-L, 0]`` with ``|x - z| <= M``.

    ``L = math.inf`` gives the limiting piecewise form.
    """
    if M < 0:
        raise DomainError("M must be non-negative")
    hi = min(0, z + M)
    if math.isinf(L):
        if z < -M:
            return 2 * M + 1
        return max(0, M + 1 - z) if z <= M else 0
    lo = max(-int(L), z - M)
    return max(0, hi - lo + 1)


def overlap_weights(L, M: int, zs) -> np.ndarray:
    return np.array([overlap_weight(L, M, int(z)) for z in zs], dtype=float)


# ---------------------------------------------------------------------------
# state plumbing


def _as_state(state) -> ed.StationaryState:
    if isinstance(state, ff.Occupation):
        return ed.StationaryState(
            "free-fermion-occupation",
            None,
            state.label,
            occupation=state,
        )
    if not isinstance(state, ed.StationaryState):
        raise DomainError(f"unsupported state {type(state).__name__}")
    return state


def _wick(state) -> ff.Occupation | None:
    return state.occupation if state.kind == "free-fermion-occupation" else None


def _ed_offset(state, lo: int) -> int:
    """Offset placing site ``lo`` on ring site 0."""
    return -lo


def current_value(state) -> float:
    """``ω(j_{0,1})``."""
    state = _as_state(state)
    occ = _wick(state)
    if occ is not None:
        return ff.current_expectation(occ)
    return float(ed.expect(state, model_current(state.model, 0)).real)


def _region_span(L: int, M: int, shift: int = 0) -> tuple[int, int]:
    return min(-L, -M) + shift, max(0, M + 1) + shift


def _check_fits(state, L: int, M: int, shift: int = 0) -> None:
    lo, hi = _region_span(L, M, shift)
    R = _wick(state).R if _wick(state) is not None else state.geometry.sites
    if hi - lo + 1 > R:
        raise DomainError(f"regions [{lo},{hi}] do not fit on a ring of {R} sites")


# ---------------------------------------------------------------------------
# integrand


def _wick_double_sum(occ: ff.Occupation, L: int, M: int, t: float, shift: int) -> float:
    """``Σ_x Σ_y ω(i[n_x, h_{y,y+1}(t)])`` from the full one-body matrices, pair by pair."""
    data = ff.one_particle(occ)
    R = occ.R
    U = data.propagator(t)
    G = data.G
    W = U @ G.T  # W[q, x] = Σ_v U_qv G_xv
    Z = U.conj() @ G  # Z[p, x] = Σ_u conj(U_pu) G_ux
    xs = (np.arange(-L, 1) + shift) % R
    ys = np.arange(-M, M + 1) + shift
    b = ff.hopping_bond(0, occ.t, occ.mu)
    total = np.zeros((len(ys), len(xs)), dtype=complex)
    for i, si in enumerate(b.sites):
        for j, sj in enumerate(b.sites):
            c = b.coeffs[i, j]
            if c == 0:
                continue
            p, q = (ys + si) % R, (ys + sj) % R
            # ω([n_x, h(t)]) = Σ_v h(t)_xv G_xv - Σ_u h(t)_ux G_ux
            total += c * (U[np.ix_(p, xs)].conj() * W[np.ix_(q, xs)] - U[np.ix_(q, xs)] * Z[np.ix_(p, xs)])
    return float((1j * total.sum()).real)


def _ed_commutator(state, L, M, t, shift):
    model = state.model
    lo, _ = _region_span(L, M, shift)
    off = _ed_offset(state, lo)
    N = ed.to_eigenbasis(model_region_charge(model, (-L + shift, shift)), state.spectral, off)
    H = ed.to_eigenbasis(model_region_hamiltonian(model, (-M + shift, M + 1 + shift)), state.spectral, off)
    return float((1j * ed.expect(state, N.commutator(H.evolve(t)))).real)


def _ed_double_sum(state, L, M, t, shift):
    model = state.model
    lo, _ = _region_span(L, M, shift)
    off = _ed_offset(state, lo)
    hs = [ed.evolve(model_bond(model, y + shift), state.spectral, t, off) for y in range(-M, M + 1)]
    total = 0.0
    for x in range(-L, 1):
        n = ed.to_eigenbasis(model_charge(model, x + shift), state.spectral, off)
        for h in hs:
            total += (1j * ed.expect(state, n.commutator(h))).real
    return float(total)


def sumrule_integrand(state, L: int, M: int, t: float, *, method: str = "commutator", shift: int = 0) -> float:
    """``ω(i[N_{[-L,0]}, H_{[-M,M+1]}(t)])`` (regions translated by ``shift``).

    method
        ``"commutator"`` evaluates the single commutator of the region sums;
        ``"double-sum"`` adds ``ω(i[n_x, h_{y,y+1}(t)])`` over all pairs.
    """
    state = _as_state(state)
    _check_fits(state, L, M, shift)
    occ = _wick(state)
    if method not in ("commutator", "double-sum"):
        raise DomainError(f"unknown method {method!r}")
    if occ is not None:
        if method == "commutator":
            N = ff.region_charge(-L + shift, shift)
            H = ff.region_hamiltonian(-M + shift, M + 1 + shift, occ.t, occ.mu)
            return float((1j * ff.commutator_expect(occ, N, H, t)).real)
        return _wick_double_sum(occ, L, M, t, shift)
    if state.kind != "density-matrix":
        raise DomainError("unsupported state")
    if method == "commutator":
        return _ed_commutator(state, L, M, t, shift)
    return _ed_double_sum(state, L, M, t, shift)


# ---------------------------------------------------------------------------
# charge-energy window integral


@dataclass(frozen=True)
class SumRuleResult:
    L: int
    M: int
    value: float
    target: float
    current: float
    note: str = ""

    @property
    def deviation(self) -> float:
        return abs(self.value - self.target)

    @property
    def rel_dev(self) -> float:
        """``|value - target| / |target|``; the absolute deviation when the target vanishes."""
        return self.deviation / abs(self.target) if self.target != 0 else self.deviation


def sumrule_integral(state, L: int, M: int, window: TestWindow, *, method: str = "commutator", shift: int = 0) -> SumRuleResult:
    """``∫ f(t) ω(i[N_{[-L,0]}, H_{[-M,M+1]}(t)]) dt`` and the target ``√(2π) ω(j_{0,1}) f̃(0)``."""
    state = _as_state(state)
    _check_fits(state, L, M, shift)
    occ = _wick(state)
    if occ is not None:
        ff.one_particle(occ).precompute(window.times)
    values = _pmap(lambda t: sumrule_integrand(state, L, M, t, method=method, shift=shift), window.times)
    value = float(window.integrate(np.array(values)))
    j = current_value(state)
    target = math.sqrt(2 * math.pi) * j * window.transform_at_zero()
    return SumRuleResult(L, M, value, target, j)


# ---------------------------------------------------------------------------
# correlation grid


@dataclass(frozen=True, eq=False)
class CorrelationGrid:
    zs: np.ndarray
    ts: np.ndarray
    values: np.ndarray  # shape (len(zs), len(ts)), ρ(z, t)
    current: float
    label: str = ""

    @property
    def zmax(self) -> int:
        return int(np.max(np.abs(self.zs)))

    @property
    def dt(self) -> float:
        return float(self.ts[1] - self.ts[0])

    def at(self, z: int) -> np.ndarray:
        return self.values[int(np.flatnonzero(self.zs == z)[0])]

    def reversed_time(self) -> np.ndarray:
        """``ρ(z, -t)`` on the same (symmetric) grid."""
        if not np.allclose(self.ts, -self.ts[::-1], atol=1e-12):
            raise DomainError("time grid is not symmetric")
        return self.values[:, ::-1]

    def rows(self):
        for i, z in enumerate(self.zs):
            for k, t in enumerate(self.ts):
                v = self.values[i, k]
                yield int(z), float(t), float(v.real), float(v.imag)


def _wick_column(occ: ff.Occupation, zs, t: float) -> np.ndarray:
    # ω(n̂_0 ĥ_{y}(-t)) with y = -z
    return ff.bond_correlations(occ, 0, -np.asarray(zs), -t)


def _ed_column(state, zs, t, offset):
    model = state.model
    n = ed.center(model_charge(model, 0), state, offset)
    out = []
    for z in zs:
        h = ed.center(model_bond(model, -int(z)), state, offset)
        out.append(ed.two_time(state, n, h, -t, offset))
    return np.array(out)


def correlation_grid(state, zmax: int, ts, *, offset: int | None = None) -> CorrelationGrid:
    """``ρ(z, t)`` for ``|z| <= zmax`` on the time grid ``ts``."""
    state = _as_state(state)
    zs = np.arange(-zmax, zmax + 1)
    ts = np.asarray(list(ts), dtype=float)
    occ = _wick(state)
    if occ is not None:
        if 2 * zmax + 2 > occ.R:
            raise DomainError(f"zmax={zmax} does not fit on a ring of {occ.R}")
        ff.one_particle(occ).precompute(-ts)
        cols = _pmap(lambda t: _wick_column(occ, zs, t), ts)
    elif state.kind == "density-matrix":
        R = state.geometry.sites
        if 2 * zmax + 2 > R:
            raise DomainError(f"zmax={zmax} does not fit on a ring of {R}")
        off = zmax if offset is None else offset
        cols = [_ed_column(state, zs, t, off) for t in ts]
    else:
        raise DomainError("unsupported state")
    values = 1j * np.array(cols).T / RHO_NORM
    return CorrelationGrid(zs, ts, values, current_value(state), state.label)


def choose_zmax(state, window: TestWindow, *, start: int = 4, cap: int | None = None, ratio: float = 1e-3) -> int:
    """Smallest octave ``z`` with ``max_t |ρ(±z, t)| < ratio · max_t |ρ(0, t)|``.

    Sharp occupations (see :func:`nesscurrent.freefermion.is_sharp`) get the result doubled.
    """
    state = _as_state(state)
    occ = _wick(state)
    R = occ.R if occ is not None else state.geometry.sites
    cap = cap if cap is not None else (R - 2) // 2
    ts = window.times[:: max(1, len(window.times) // 24)]
    ref = np.max(np.abs(correlation_grid(state, 0, ts).values))
    z = start
    while z < cap:
        g = correlation_grid(state, z, ts)
        edge = max(np.max(np.abs(g.at(z))), np.max(np.abs(g.at(-z))))
        if edge < ratio * ref:
            break
        z *= 2
    z = min(z, cap)
    if occ is not None and ff.is_sharp(occ):
        z = min(2 * z, cap)
    return int(z)


# ---------------------------------------------------------------------------
# decomposition of the L → ∞ integral


@dataclass(frozen=True)
class TermDecomposition:
    M: int
    outer: float  # z < -M, weight 2M+1
    inner: float  # |z| <= M, weight M+1
    moment: float  # |z| <= M, weight -z

    @property
    def total(self) -> float:
        return self.outer + self.inner + self.moment


def term_decomposition(grid: CorrelationGrid, M: int, window: TestWindow, *, margin: int = 16) -> TermDecomposition:
    """Split ``lim_L ∫ f ω(i[N_{[-L,0]}, H_{[-M,M+1]}(t)])`` into its three overlap pieces."""
    if grid.zmax < M + margin:
        raise DomainError(f"grid zmax={grid.zmax} is below M + margin = {M + margin}")
    _check_grid(grid, window)
    back = grid.reversed_time().real
    zs = grid.zs
    pref = 2.0 * RHO_NORM  # 4π√(2π)

    def integral(weights):
        return float(pref * window.integrate(weights @ back))

    outer = np.where(zs < -M, 2 * M + 1, 0.0)
    inner = np.where(np.abs(zs) <= M, M + 1, 0.0)
    moment = np.where(np.abs(zs) <= M, -zs, 0.0).astype(float)
    return TermDecomposition(M, integral(outer), integral(inner), integral(moment))


def grid_integral(grid: CorrelationGrid, L, M: int, window: TestWindow) -> float:
    """Charge-energy window integral from the correlation grid with finite-``L`` overlap weights."""
    _check_grid(grid, window)
    w = overlap_weights(L, M, grid.zs)
    return float(2.0 * RHO_NORM * window.integrate(w @ grid.reversed_time().real))


def _check_grid(grid: CorrelationGrid, window: TestWindow) -> None:
    if len(grid.ts) != len(window.times) or not np.allclose(grid.ts, window.times, atol=1e-12):
        raise DomainError("correlation grid and window use different time grids")


# ---------------------------------------------------------------------------
# spectral density and the k-derivative sum rule


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    ks: np.ndarray
    eps: np.ndarray
    values: np.ndarray  # shape (len(ks), len(eps))
    taper: np.ndarray
    zs: np.ndarray
    ts: np.ndarray

    def rows(self):
        for i, k in enumerate(self.ks):
            for m, e in enumerate(self.eps):
                v = self.values[i, m]
                yield float(k), float(e), float(v.real), float(v.imag)


def dft_momenta(n: int) -> np.ndarray:
    return ff.momenta(n)


def dft_energies(nt: int, dt: float) -> np.ndarray:
    m = np.arange(-(nt // 2), nt - nt // 2)
    return 2 * np.pi * m / (nt * dt)


def spectral_density(grid: CorrelationGrid, taper=None, *, ks=None, eps=None) -> SpectralDensity:
    """``ρ̃(k, ε) = (2π)^{-1/2} Σ_z Σ_t Δt w(t) ρ(z,t) e^{-i(kz - εt)}``.

    ``taper`` is an array of weights on the grid times or a :class:`TestWindow`
    (its values); default is 1.  Default ``k`` and ``ε`` grids are the DFT
    grids of the correlation grid, on which :func:`reconstruct` is exact.
    """
    nt = len(grid.ts)
    if nt < 3:
        raise DomainError("insufficient time grid")
    w = np.ones(nt) if taper is None else np.asarray(taper.values if isinstance(taper, TestWindow) else taper, dtype=float)
    if w.shape != (nt,):
        raise DomainError("taper does not match the time grid")
    ks = dft_momenta(len(grid.zs)) if ks is None else np.asarray(ks, dtype=float)
    eps = dft_energies(nt, grid.dt) if eps is None else np.asarray(eps, dtype=float)
    Ek = np.exp(-1j * np.outer(ks, grid.zs))
    Ee = np.exp(1j * np.outer(grid.ts, eps))
    vals = grid.dt / math.sqrt(2 * math.pi) * (Ek @ (grid.values * w) @ Ee)
    return SpectralDensity(ks, eps, vals, w, grid.zs, grid.ts)


def reconstruct(sd: SpectralDensity) -> np.ndarray:
    """``(2π√(2π))^{-1} Σ_k Σ_ε Δk Δε ρ̃ e^{i(kz - εt)}`` on the original grid (``w·ρ``)."""
    dk = 2 * np.pi / len(sd.ks)
    de = sd.eps[1] - sd.eps[0]
    Ek = np.exp(1j * np.outer(sd.zs, sd.ks))
    Ee = np.exp(-1j * np.outer(sd.eps, sd.ts))
    return dk * de * (Ek @ sd.values @ Ee) / RHO_NORM


@dataclass(frozen=True)
class TheoremResult:
    value: float
    imag: float
    target: float
    current: float
    route: str

    @property
    def rel_dev(self) -> float:
        d = abs(self.value - self.target)
        return d / abs(self.target) if self.target != 0 else d


def derivative_spectrum(grid: CorrelationGrid) -> tuple[np.ndarray, np.ndarray]:
    """``D(ε) = ∂_k[ρ̃(k,ε) + ρ̃(-k,-ε)^*]|_{k=0}`` on the DFT energy grid.

    ``∂_k ρ̃(k,ε)|_0 = (2π)^{-1/2} Σ_z Σ_t Δt (-iz) ρ(z,t) e^{iεt}`` and the
    second term is the same sum with ``ρ`` replaced by ``ρ^*``.
    """
    eps = dft_energies(len(grid.ts), grid.dt)
    Ee = np.exp(1j * np.outer(grid.ts, eps))
    zw = (-1j * grid.zs)[:, None]
    d = grid.dt / math.sqrt(2 * math.pi) * np.sum(zw * (grid.values + grid.values.conj()) @ Ee, axis=0)
    return eps, d


def theorem_sumrule(grid: CorrelationGrid, window: TestWindow, *, route: str = "spectral") -> TheoremResult:
    """``S(f) = -2πi ∫ dε f̃(ε) D(ε)`` against the target ``ω(j_{0,1}) f̃(0)``.

    route
        ``"spectral"``: the ε-integral on the DFT energy grid with ``f̃`` taken
        by the same rectangle rule (exact discrete Parseval pairing);
        ``"time"``: the equivalent time-domain form
        ``-4π ∫ dt f(t) Σ_z z Re ρ(z, -t)`` by Simpson.
    """
    _check_grid(grid, window)
    f0 = window.transform_at_zero()
    target = grid.current * f0
    if route == "spectral":
        eps, d = derivative_spectrum(grid)
        ft = window.dt / math.sqrt(2 * math.pi) * (np.exp(1j * np.outer(eps, window.times)) @ window.values)
        de = eps[1] - eps[0]
        s = -2j * math.pi * de * np.sum(ft * d)
    elif route == "time":
        moment = grid.zs.astype(float) @ grid.reversed_time().real
        s = -4.0 * math.pi * window.integrate(moment)
    else:
        raise DomainError(f"unknown route {route!r}")
    s = complex(s)
    return TheoremResult(s.real, s.imag, target, grid.current, route)
