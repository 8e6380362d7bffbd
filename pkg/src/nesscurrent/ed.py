"""Exact dynamics on a finite ring.

The ring Hamiltonian ``H = Σ_{x mod R} h_{x,x+1}`` is diagonalised once,
block by block in the eigenspaces of the total charge when the on-site charge
is diagonal.  Ring operators are then held in the energy eigenbasis
(:class:`EigenOperator`), where Heisenberg evolution ``A(t) = e^{iHt} A e^{-iHt}``
is an elementwise phase ``A_ab e^{i(E_a - E_b)t}``.

Conventions
-----------
* Site ``s`` of a :class:`~nesscurrent.algebra.LocalOperator` is placed on ring
  site ``(s + offset) mod R``; the product basis has ring site 0 as the most
  significant tensor index.
* For ``R = 2`` the ring carries both bonds ``h_{0,1}`` and ``h_{1,0}``, so
  every bond energy is counted twice relative to a single bond.
* ``boundary="fermionic"`` replaces the wrap bond ``h_{R-1,0}`` by its
  Jordan-Wigner image for periodic fermions: in the sector of even particle
  number the wrap bond is conjugated by ``e^{iπ n_0}``, which flips the sign of
  the hopping across the seam.  It needs a diagonal charge with eigenvalues in
  ``{0, 1}``.  Operators must then not straddle the seam.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import DomainError, LatticeGeometry, LocalOperator, max_abs
from .models import ModelSpec, bond

__all__ = [
    "DEFAULT_DIM_CAP",
    "Sector",
    "SpectralData",
    "EigenOperator",
    "StationaryState",
    "embed_sparse",
    "ring_hamiltonian",
    "diagonalize",
    "to_eigenbasis",
    "local_sparse",
    "commutator_norm",
    "evolve",
    "make_state",
    "occupation_density_matrix",
    "expect",
    "two_time",
    "center",
    "GuardResult",
    "guard_ring",
]

log = logging.getLogger(__name__)

DEFAULT_DIM_CAP = 2**14


# ---------------------------------------------------------------------------
# sparse embedding


def _site_weights(R: int, d: int) -> np.ndarray:
    return d ** np.arange(R - 1, -1, -1, dtype=np.int64)


def embed_sparse(matrix: np.ndarray, sites, R: int, d: int) -> sp.csr_matrix:
    """Embed an operator acting on ``sites`` (ring sites, in tensor order) into ``(C^d)^{⊗R}``."""
    sites = [int(s) % R for s in sites]
    if len(set(sites)) != len(sites):
        raise DomainError(f"sites {sites} overlap on a ring of {R}")
    k = len(sites)
    w = _site_weights(R, d)
    rest_sites = [s for s in range(R) if s not in sites]
    rest = np.zeros(1, dtype=np.int64)
    for s in rest_sites:
        rest = (rest[:, None] + np.arange(d, dtype=np.int64)[None, :] * w[s]).ravel()
    local = np.zeros(1, dtype=np.int64)
    for s in sites:
        local = (local[:, None] + np.arange(d, dtype=np.int64)[None, :] * w[s]).ravel()
    m = sp.coo_matrix(np.asarray(matrix))
    if m.shape != (d**k, d**k):
        raise DomainError("matrix does not match the number of sites")
    rows = (rest[:, None] + local[m.row][None, :]).ravel()
    cols = (rest[:, None] + local[m.col][None, :]).ravel()
    vals = np.broadcast_to(m.data, (len(rest), m.nnz)).ravel()
    dim = d**R
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def _ring_sites(op: LocalOperator, R: int, offset: int, boundary: str) -> list[int]:
    if op.width > R:
        raise DomainError(f"support {list(op.support)} does not fit on a ring of {R}")
    sites = [(s + offset) % R for s in op.sites]
    if boundary == "fermionic" and any(b < a for a, b in zip(sites, sites[1:])):
        raise DomainError(
            f"support {list(op.support)} straddles the Jordan-Wigner seam of a fermionic ring; "
            "shift the operator (offset) so it lies inside [0, R-1]"
        )
    return sites


def _parity(model: ModelSpec, R: int) -> np.ndarray:
    n = np.real(np.diag(model.charge))
    if max_abs(model.charge - np.diag(np.diag(model.charge))) > 0 or not np.all(np.isin(np.round(n, 12), (0.0, 1.0))):
        raise DomainError("a fermionic boundary needs a diagonal charge with eigenvalues 0 and 1")
    occ = np.zeros(1)
    for _ in range(R):
        occ = (occ[:, None] + n[None, :]).ravel()
    return np.where(np.round(occ).astype(int) % 2 == 0, 1.0, -1.0)


def ring_hamiltonian(model: ModelSpec, geometry: LatticeGeometry, boundary: str = "periodic") -> sp.csr_matrix:
    """Sparse ``H_ring`` in the product basis."""
    if geometry.mode != "ring":
        raise DomainError("ring_hamiltonian needs a ring geometry")
    if boundary not in ("periodic", "fermionic"):
        raise DomainError(f"unknown boundary {boundary!r}")
    R, d = geometry.sites, geometry.local_dim
    if d != model.local_dim:
        raise DomainError("geometry and model disagree on the local dimension")
    H = sp.csr_matrix((d**R, d**R), dtype=complex)
    for x in range(R - 1):
        H = H + embed_sparse(model.bond, [x, x + 1], R, d)
    wrap = embed_sparse(model.bond, [R - 1, 0], R, d)
    if boundary == "fermionic":
        p = _parity(model, R)
        phase = np.exp(1j * np.pi * np.real(np.diag(model.charge)))
        z0 = embed_sparse(np.diag(phase), [0], R, d)
        twisted = z0.conj().T @ wrap @ z0
        even = sp.diags((1 + p) / 2)
        odd = sp.diags((1 - p) / 2)
        wrap = odd @ wrap + even @ twisted
    return (H + wrap).tocsr()


# ---------------------------------------------------------------------------
# spectral data


@dataclass(frozen=True, eq=False)
class Sector:
    """One block of the Hamiltonian: basis indices, energies, eigenvectors."""

    charge: float
    index: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Spectral decomposition of ``H_ring``, one :class:`Sector` per charge block."""

    model: ModelSpec
    geometry: LatticeGeometry
    boundary: str
    sectors: tuple
    blocked: bool
    _label: np.ndarray = field(repr=False)
    _position: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([s.energies for s in self.sectors])

    @property
    def eigenvectors(self) -> np.ndarray:
        """Dense unitary with eigenvectors as columns, ordered like :attr:`eigenvalues`."""
        U = np.zeros((self.dim, self.dim), dtype=complex)
        col = 0
        for s in self.sectors:
            U[np.ix_(s.index, np.arange(col, col + len(s.index)))] = s.vectors
            col += len(s.index)
        return U

    def hamiltonian(self) -> sp.csr_matrix:
        return ring_hamiltonian(self.model, self.geometry, self.boundary)

    def identity(self) -> "EigenOperator":
        return EigenOperator(self, {(i, i): np.eye(len(s.index), dtype=complex) for i, s in enumerate(self.sectors)})

    def hamiltonian_operator(self) -> "EigenOperator":
        return EigenOperator(self, {(i, i): np.diag(s.energies).astype(complex) for i, s in enumerate(self.sectors)})


def _charge_labels(model: ModelSpec, R: int) -> np.ndarray | None:
    n = model.charge
    if max_abs(n - np.diag(np.diag(n))) > 0:
        return None
    q = np.zeros(1)
    for _ in range(R):
        q = (q[:, None] + np.real(np.diag(n))[None, :]).ravel()
    return np.round(q * 1e8).astype(np.int64)


def diagonalize(
    model: ModelSpec,
    geometry: LatticeGeometry,
    *,
    boundary: str = "periodic",
    blocked: bool = True,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> SpectralData:
    """Full diagonalisation of the ring Hamiltonian.

    With ``blocked=True`` (and a diagonal charge) each total-charge sector is
    diagonalised separately; the result is the same decomposition as the
    unblocked path up to the choice of basis inside degenerate eigenspaces.
    """
    if geometry.dim > dim_cap:
        raise DomainError(f"Hilbert-space dimension {geometry.dim} exceeds the cap {dim_cap}")
    H = ring_hamiltonian(model, geometry, boundary)
    labels = _charge_labels(model, geometry.sites) if blocked else None
    if labels is None:
        labels = np.zeros(geometry.dim, dtype=np.int64)
        blocked = False
    sectors = []
    label_of = np.empty(geometry.dim, dtype=np.int64)
    position = np.empty(geometry.dim, dtype=np.int64)
    for k, q in enumerate(np.unique(labels)):
        idx = np.flatnonzero(labels == q)
        block = H[idx][:, idx].toarray()
        w, v = np.linalg.eigh(block)
        sectors.append(Sector(q / 1e8, idx, w, v))
        label_of[idx] = k
        position[idx] = np.arange(len(idx))
    log.debug("diagonalised R=%d in %d sector(s)", geometry.sites, len(sectors))
    return SpectralData(model, geometry, boundary, tuple(sectors), blocked, label_of, position)


# ---------------------------------------------------------------------------
# operators in the energy eigenbasis


def _block_norm(b: np.ndarray) -> float:
    if b.size == 0:
        return 0.0
    scale = max(1.0, max_abs(b))
    if max_abs(b - b.conj().T) <= 1e-13 * scale:
        return float(np.max(np.abs(np.linalg.eigvalsh(b))))
    if max_abs(b + b.conj().T) <= 1e-13 * scale:
        return float(np.max(np.abs(np.linalg.eigvalsh(1j * b))))
    return float(np.linalg.norm(b, 2))


@dataclass(frozen=True, eq=False)
class EigenOperator:
    """A ring operator as sector blocks in the energy eigenbasis."""

    spectral: SpectralData
    blocks: dict

    def _new(self, blocks) -> "EigenOperator":
        return EigenOperator(self.spectral, blocks)

    def evolve(self, t: float) -> "EigenOperator":
        """``e^{iHt} A e^{-iHt}``."""
        secs = self.spectral.sectors
        out = {}
        for (i, j), b in self.blocks.items():
            out[(i, j)] = np.exp(1j * t * secs[i].energies)[:, None] * b * np.exp(-1j * t * secs[j].energies)[None, :]
        return self._new(out)

    def __add__(self, other: "EigenOperator") -> "EigenOperator":
        out = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            out[k] = out[k] + v if k in out else v.copy()
        return self._new(out)

    def __sub__(self, other: "EigenOperator") -> "EigenOperator":
        return self + other.scale(-1)

    def scale(self, c) -> "EigenOperator":
        return self._new({k: c * v for k, v in self.blocks.items()})

    def __matmul__(self, other: "EigenOperator") -> "EigenOperator":
        out: dict = {}
        for (i, j), a in self.blocks.items():
            for (k, l), b in other.blocks.items():
                if j == k:
                    p = a @ b
                    out[(i, l)] = out[(i, l)] + p if (i, l) in out else p
        return self._new(out)

    def commutator(self, other: "EigenOperator") -> "EigenOperator":
        return (self @ other) - (other @ self)

    def adjoint(self) -> "EigenOperator":
        return self._new({(j, i): v.conj().T for (i, j), v in self.blocks.items()})

    def add_identity(self, c) -> "EigenOperator":
        return self + self.spectral.identity().scale(c)

    def trace(self) -> complex:
        return complex(sum(np.trace(v) for (i, j), v in self.blocks.items() if i == j))

    def norm(self) -> float:
        """Operator norm (largest singular value)."""
        if not self.blocks:
            return 0.0
        if all(i == j for i, j in self.blocks):
            return max(_block_norm(v) for v in self.blocks.values())
        return _block_norm(self._sector_ordered())

    def _sector_ordered(self) -> np.ndarray:
        sizes = [len(s.index) for s in self.spectral.sectors]
        starts = np.concatenate([[0], np.cumsum(sizes)])
        M = np.zeros((starts[-1], starts[-1]), dtype=complex)
        for (i, j), v in self.blocks.items():
            M[starts[i] : starts[i + 1], starts[j] : starts[j + 1]] += v
        return M

    def to_dense(self) -> np.ndarray:
        """Product-basis matrix (small rings only)."""
        U = self.spectral.eigenvectors
        return U @ self._sector_ordered() @ U.conj().T

    def max_abs(self) -> float:
        return max((max_abs(v) for v in self.blocks.values()), default=0.0)

    def product_blocks(self) -> dict:
        """Sector blocks rotated back to the product basis: ``V_i X_ij V_j^*``."""
        secs = self.spectral.sectors
        return {(i, j): secs[i].vectors @ v @ secs[j].vectors.conj().T for (i, j), v in self.blocks.items()}


def _sparse_blocks(S: sp.spmatrix, spectral: SpectralData) -> dict:
    coo = S.tocoo()
    keep = coo.data != 0
    rows, cols = coo.row[keep], coo.col[keep]
    if not rows.size:
        return {}
    lab = spectral._label
    pairs = np.unique(np.stack([lab[rows], lab[cols]], axis=1), axis=0)
    secs = spectral.sectors
    S = S.tocsr()
    return {(int(i), int(j)): S[secs[i].index][:, secs[j].index] for i, j in pairs}


def local_sparse(op: LocalOperator, spectral: SpectralData, offset: int = 0) -> sp.csr_matrix:
    """Full product-basis sparse matrix of a local operator placed on the ring."""
    R, d = spectral.geometry.sites, spectral.geometry.local_dim
    if op.local_dim != d:
        raise DomainError("operator and ring disagree on the local dimension")
    return embed_sparse(op.matrix, _ring_sites(op, R, offset, spectral.boundary), R, d)


def commutator_norm(product_blocks: dict, local, spectral: SpectralData, offset: int = 0) -> float:
    """``||[X, B]||`` for ``X`` given by :meth:`EigenOperator.product_blocks` and a local ``B``.

    Works in the product basis so that ``B`` stays sparse.
    """
    S = local_sparse(local, spectral, offset) if isinstance(local, LocalOperator) else sp.csr_matrix(local)
    sb = _sparse_blocks(S, spectral)
    out: dict = {}
    for (i, j), x in product_blocks.items():
        for (k, l), b in sb.items():
            if j == k:
                p = np.asarray((b.T @ x.T).T)
                out[(i, l)] = out[(i, l)] + p if (i, l) in out else p
            if l == i:
                p = np.asarray(b @ x)
                out[(k, j)] = out[(k, j)] - p if (k, j) in out else -p
    return EigenOperator(spectral, out).norm()


def to_eigenbasis(op, spectral: SpectralData, offset: int = 0) -> EigenOperator:
    """Place a :class:`LocalOperator` (or sparse/dense full-space matrix) on the ring."""
    if isinstance(op, EigenOperator):
        return op
    R, d = spectral.geometry.sites, spectral.geometry.local_dim
    if isinstance(op, LocalOperator):
        if op.local_dim != d:
            raise DomainError("operator and ring disagree on the local dimension")
        S = local_sparse(op, spectral, offset)
    else:
        S = sp.csr_matrix(op)
        if S.shape != (spectral.dim, spectral.dim):
            raise DomainError("full-space matrix has the wrong shape")
    secs = spectral.sectors
    blocks = {(i, j): secs[i].vectors.conj().T @ (sub @ secs[j].vectors) for (i, j), sub in _sparse_blocks(S, spectral).items()}
    return EigenOperator(spectral, blocks)


def evolve(op, spectral: SpectralData, t: float, offset: int = 0) -> EigenOperator:
    """Heisenberg-evolved ring operator ``A(t) = e^{iHt} A e^{-iHt}``."""
    return to_eigenbasis(op, spectral, offset).evolve(t)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class StationaryState:
    """A stationary, translation-invariant expectation functional.

    ``kind == "density-matrix"``: ``blocks`` holds ``ρ`` per sector in the
    energy eigenbasis of ``spectral`` (``ρ`` commutes with ``H`` by
    construction).  ``kind == "free-fermion-occupation"``: ``occupation``
    holds the momentum occupation and expectations go through Wick's theorem.
    """

    kind: str
    geometry: LatticeGeometry
    label: str
    spectral: SpectralData | None = None
    blocks: dict | None = None
    occupation: object = None
    params: dict = field(default_factory=dict)

    @property
    def model(self) -> ModelSpec | None:
        return self.spectral.model if self.spectral is not None else None

    def rho(self) -> EigenOperator:
        return EigenOperator(self.spectral, dict(self.blocks))


def make_state(
    model: ModelSpec,
    geometry: LatticeGeometry,
    kind: str,
    params: dict | None = None,
    *,
    spectral: SpectralData | None = None,
    boundary: str = "periodic",
) -> StationaryState:
    """Build a stationary state.

    kind
        ``"infinite-temperature"``, ``"gibbs"`` (``params["beta"]``) or
        ``"momentum-occupation"`` (free fermions only; ``params`` holds an
        ``occupation`` or ``filling`` and ``boost``).
    """
    params = dict(params or {})
    if kind == "momentum-occupation":
        from . import freefermion

        if model.name != "fermion":
            raise DomainError("momentum-occupation states need the fermion model")
        if model.params.get("v", 0.0) != 0.0:
            raise DomainError("momentum-occupation states are unsupported for v != 0 (not quadratic)")
        occ = params.get("occupation")
        if occ is None:
            occ = freefermion.boosted_fermi(
                geometry.sites, params["filling"], params.get("boost", 0.0), t=model.params["t"], mu=model.params["mu"]
            )
        return StationaryState("free-fermion-occupation", geometry, "momentum-occupation", occupation=occ, params=params)
    if spectral is None:
        spectral = diagonalize(model, geometry, boundary=boundary)
    if kind == "infinite-temperature":
        dim = spectral.dim
        blocks = {(i, i): np.eye(len(s.index), dtype=complex) / dim for i, s in enumerate(spectral.sectors)}
    elif kind == "gibbs":
        beta = float(params["beta"])
        e0 = spectral.eigenvalues.min()
        weights = [np.exp(-beta * (s.energies - e0)) for s in spectral.sectors]
        Z = sum(w.sum() for w in weights)
        blocks = {(i, i): np.diag(w / Z).astype(complex) for i, w in enumerate(weights)}
    else:
        raise DomainError(f"unknown state kind {kind!r}")
    return StationaryState("density-matrix", geometry, kind, spectral=spectral, blocks=blocks, params=params)


def jordan_wigner_annihilators(R: int) -> list[sp.csr_matrix]:
    """``c_x = Π_{y<x} (1 - 2 n_y) σ^-_x`` with ``n = (1 + σ^3)/2`` (index 0 occupied)."""
    lower = sp.csr_matrix(np.array([[0, 0], [1, 0]], dtype=complex))
    string = sp.csr_matrix(np.diag([-1.0, 1.0]).astype(complex))
    eye = sp.identity(2, dtype=complex, format="csr")
    ops = []
    for x in range(R):
        factors = [string] * x + [lower] + [eye] * (R - x - 1)
        m = factors[0]
        for f in factors[1:]:
            m = sp.kron(m, f, format="csr")
        ops.append(m)
    return ops


def occupation_density_matrix(spectral: SpectralData, occupation) -> StationaryState:
    """Gaussian state of a momentum occupation, built on the Jordan-Wigner Fock space.

    ``ρ = Π_k [n(k) c_k^* c_k + (1 - n(k)) c_k c_k^*]`` with
    ``c_k = R^{-1/2} Σ_x e^{-ikx} c_x``.  Needs the fermion model on a ring
    with ``boundary="fermionic"`` so that the ring Hamiltonian is the
    periodic free-fermion one.
    """
    if spectral.boundary != "fermionic":
        raise DomainError("occupation states need a fermionic-boundary ring")
    R = spectral.geometry.sites
    if occupation.R != R:
        raise DomainError("occupation and ring sizes differ")
    cs = jordan_wigner_annihilators(R)
    x = np.arange(R)
    rho = sp.identity(2**R, dtype=complex, format="csr")
    eye = sp.identity(2**R, dtype=complex, format="csr")
    for k, nk in zip(occupation.momenta, occupation.n):
        ck = sum(np.exp(-1j * k * xx) * c for xx, c in zip(x, cs)) / np.sqrt(R)
        num = (ck.conj().T @ ck).tocsr()
        rho = rho @ (nk * num + (1 - nk) * (eye - num))
    state_op = to_eigenbasis(rho, spectral)
    # ρ commutes with H; off-diagonal sector blocks vanish identically
    blocks = {k: v for k, v in state_op.blocks.items() if k[0] == k[1]}
    return StationaryState(
        "density-matrix", spectral.geometry, "momentum-occupation", spectral=spectral, blocks=blocks, occupation=occupation
    )


def expect(state: StationaryState, op, offset: int = 0) -> complex:
    """``ω(A)``."""
    if state.kind == "free-fermion-occupation":
        from . import freefermion

        return freefermion.expect(state.occupation, op)
    A = to_eigenbasis(op, state.spectral, offset)
    return complex(sum(np.sum(state.blocks[(i, i)].T * v) for (i, j), v in A.blocks.items() if i == j and (i, i) in state.blocks))


def two_time(state: StationaryState, a, b, t: float, offset: int = 0) -> complex:
    """``ω(A B(t))``."""
    if state.kind == "free-fermion-occupation":
        from . import freefermion

        return freefermion.wick_two_time(state.occupation, a, b, t, connected=False)
    A = to_eigenbasis(a, state.spectral, offset)
    B = to_eigenbasis(b, state.spectral, offset).evolve(t)
    return expect(state, A @ B)


def center(op, state: StationaryState, offset: int = 0):
    """``Â = A - ω(A)``."""
    w = expect(state, op, offset)
    if isinstance(op, LocalOperator):
        return op.shifted_identity(-w)
    if isinstance(op, EigenOperator):
        return op.add_identity(-w)
    return op.shifted(-w)


# ---------------------------------------------------------------------------
# finite-size guard


@dataclass(frozen=True)
class GuardResult:
    ring: int
    compared_with: int | None
    max_difference: float
    passed: bool


def guard_ring(measure, start: int, local_dim: int = 2, tol: float = 1e-6, dim_cap: int = DEFAULT_DIM_CAP) -> GuardResult:
    """Find a ring on which ``measure(R)`` (an array) is converged.

    Rings are doubled; when the doubled ring exceeds the dimension cap the
    largest ring under the cap is used as the comparison ring instead.
    """
    r_max = int(np.floor(np.log(dim_cap) / np.log(local_dim) + 1e-12))
    if start > r_max:
        raise DomainError(f"a ring of {start} sites exceeds the dimension cap {dim_cap}")
    R = start
    current = np.asarray(measure(R))
    while True:
        nxt = min(2 * R, r_max)
        if nxt <= R:
            return GuardResult(R, None, float("nan"), False)
        other = np.asarray(measure(nxt))
        diff = float(np.max(np.abs(current - other))) if current.size else 0.0
        if diff < tol:
            return GuardResult(R, nxt, diff, True)
        R, current = nxt, other
