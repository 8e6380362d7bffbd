"""Dense finite-support operator algebra on a 1-d lattice.

Operators are stored as a contiguous site interval ``[a, b]`` together with a
dense matrix on ``C^d ⊗ ... ⊗ C^d`` (``b - a + 1`` factors).  Tensor factors
are ordered by ascending site index and the leftmost site is the most
significant index, so that for ``d = 2`` the operator ``σ^z`` at site 0 of the
interval ``[0, 1]`` is ``diag(1, 1, -1, -1)``.

Supports are unreduced integers.  A :class:`LatticeGeometry` only restricts
which intervals are admissible: an open interval requires the support to lie
inside it, a ring requires the support width to be at most ``R`` and reduces
the left end modulo ``R`` after a translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

__all__ = [
    "DomainError",
    "LatticeGeometry",
    "LocalOperator",
    "identity",
    "site_operator",
    "tensor_embed",
    "multiply",
    "commutator",
    "operator_norm",
    "adjoint",
    "translate",
    "identity_tolerance",
    "max_abs",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "spin_matrices",
]


class DomainError(ValueError):
    """An operation was requested outside its domain (support, geometry, parameter range)."""


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def spin_matrices(d: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin matrices ``(S^1, S^2, S^3)`` for spin ``(d - 1)/2``.

    The basis is ordered by decreasing ``S^3`` eigenvalue, so for ``d = 2`` these
    are exactly ``σ/2``.
    """
    s = (d - 1) / 2
    m = s - np.arange(d)
    sp = np.zeros((d, d), dtype=complex)
    for i in range(1, d):
        sp[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


@dataclass(frozen=True)
class LatticeGeometry:
    """Finite lattice: an open interval of sites or a ring.

    Parameters
    ----------
    mode : {"open", "ring"}
    sites : int
        Number of sites ``R >= 2``.
    local_dim : int
        On-site dimension ``d = N + 1 >= 2``.
    origin : int
        Label of the first site of an open interval (ignored on a ring, whose
        sites are labelled modulo ``R``).
    """

    mode: str
    sites: int
    local_dim: int
    origin: int = 0

    def __post_init__(self):
        if self.mode not in ("open", "ring"):
            raise DomainError(f"unknown geometry mode {self.mode!r}")
        if self.sites < 2:
            raise DomainError("a lattice needs at least 2 sites")
        if self.local_dim < 2:
            raise DomainError("local dimension must be at least 2")

    @classmethod
    def ring(cls, sites: int, local_dim: int = 2) -> "LatticeGeometry":
        return cls("ring", sites, local_dim)

    @classmethod
    def open(cls, first: int, last: int, local_dim: int = 2) -> "LatticeGeometry":
        return cls("open", last - first + 1, local_dim, first)

    @property
    def dim(self) -> int:
        return self.local_dim**self.sites

    def check_support(self, support: tuple[int, int]) -> None:
        a, b = support
        if self.mode == "open":
            if a < self.origin or b > self.origin + self.sites - 1:
                raise DomainError(
                    f"support [{a},{b}] leaves the open interval "
                    f"[{self.origin},{self.origin + self.sites - 1}]"
                )
        elif b - a + 1 > self.sites:
            raise DomainError(f"support [{a},{b}] is wider than the ring of {self.sites} sites")

    def canonical(self, support: tuple[int, int]) -> tuple[int, int]:
        if self.mode == "ring":
            a, b = support
            shift = a - a % self.sites
            return a - shift, b - shift
        return support


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A finitely supported observable: support ``[a, b]`` and a dense matrix."""

    support: tuple[int, int]
    matrix: np.ndarray
    local_dim: int = 2
    geometry: LatticeGeometry | None = field(default=None, repr=False)

    def __post_init__(self):
        a, b = self.support
        if b < a:
            raise DomainError(f"empty support [{a},{b}]")
        mat = np.array(self.matrix, dtype=complex)
        n = self.local_dim ** (b - a + 1)
        if mat.shape != (n, n):
            raise DomainError(f"matrix shape {mat.shape} does not match support [{a},{b}] (expected {n}x{n})")
        mat.setflags(write=False)
        object.__setattr__(self, "support", (int(a), int(b)))
        object.__setattr__(self, "matrix", mat)
        if self.geometry is not None:
            if self.geometry.local_dim != self.local_dim:
                raise DomainError("operator and geometry disagree on the local dimension")
            self.geometry.check_support(self.support)

    @property
    def width(self) -> int:
        return self.support[1] - self.support[0] + 1

    @property
    def sites(self) -> range:
        return range(self.support[0], self.support[1] + 1)

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        a, b = _aligned(self, other)
        return LocalOperator(a.support, a.matrix + b.matrix, a.local_dim, a.geometry)

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        a, b = _aligned(self, other)
        return LocalOperator(a.support, a.matrix - b.matrix, a.local_dim, a.geometry)

    def __neg__(self) -> "LocalOperator":
        return self.scale(-1)

    def __mul__(self, c) -> "LocalOperator":
        if isinstance(c, LocalOperator):
            return NotImplemented
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        return multiply(self, other)

    def scale(self, c) -> "LocalOperator":
        return LocalOperator(self.support, c * self.matrix, self.local_dim, self.geometry)

    def shifted_identity(self, c) -> "LocalOperator":
        """``self + c * identity`` on the same support."""
        return LocalOperator(self.support, self.matrix + c * np.eye(len(self.matrix)), self.local_dim, self.geometry)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return max_abs(self.matrix - self.matrix.conj().T) <= tol


def identity(support: tuple[int, int], local_dim: int = 2, geometry: LatticeGeometry | None = None) -> LocalOperator:
    n = local_dim ** (support[1] - support[0] + 1)
    return LocalOperator(support, np.eye(n), local_dim, geometry)


def site_operator(matrix, site: int, geometry: LatticeGeometry | None = None) -> LocalOperator:
    matrix = np.asarray(matrix, dtype=complex)
    return LocalOperator((site, site), matrix, matrix.shape[0], geometry)


def max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def identity_tolerance(a: LocalOperator, b: LocalOperator, rel: float = 1e-12) -> float:
    """Tolerance for an operator identity built from ``a`` and ``b``."""
    return rel * max(1.0, operator_norm(a) * operator_norm(b))


def _check_compatible(a: LocalOperator, b: LocalOperator) -> None:
    if a.local_dim != b.local_dim:
        raise DomainError("operators have different local dimensions")
    if a.geometry is not None and b.geometry is not None and a.geometry != b.geometry:
        raise DomainError("operators live on different lattices")


def _merged_support(a: LocalOperator, b: LocalOperator) -> tuple[tuple[int, int], int | None]:
    """Smallest interval containing both supports, and the shift applied to ``b``.

    On a ring where no shift fits both supports into ``R`` sites the whole
    ring starting at ``a``'s left end is returned with shift ``None``.
    """
    geom = a.geometry or b.geometry
    shifts = [0]
    if geom is not None and geom.mode == "ring":
        shifts = [0, -geom.sites, geom.sites]
    best = None
    for s in shifts:
        lo = min(a.support[0], b.support[0] + s)
        hi = max(a.support[1], b.support[1] + s)
        if best is None or hi - lo < best[0][1] - best[0][0]:
            best = ((lo, hi), s)
    (lo, hi), s = best
    if geom is not None and geom.mode == "ring" and hi - lo + 1 > geom.sites:
        return (a.support[0], a.support[0] + geom.sites - 1), None
    if geom is not None:
        geom.check_support((lo, hi))
    return (lo, hi), s


def _full_ring(a: LocalOperator, start: int, R: int) -> np.ndarray:
    """Matrix of ``a`` on all ``R`` ring sites, tensor factors ordered from ``start``."""
    full = tensor_embed(LocalOperator(a.support, a.matrix, a.local_dim), (a.support[0], a.support[0] + R - 1)).matrix
    roll = (start - a.support[0]) % R
    if roll == 0:
        return full
    d = a.local_dim
    t = full.reshape((d,) * (2 * R))
    order = [(i + roll) % R for i in range(R)]
    t = t.transpose(order + [R + i for i in order])
    return t.reshape(d**R, d**R)


def tensor_embed(a: LocalOperator, target: tuple[int, int]) -> LocalOperator:
    """Embed ``a`` into the larger interval ``target`` as ``1 ⊗ a ⊗ 1``."""
    lo, hi = target
    if lo > a.support[0] or hi < a.support[1]:
        raise DomainError(f"target [{lo},{hi}] does not contain support {list(a.support)}")
    left = a.local_dim ** (a.support[0] - lo)
    right = a.local_dim ** (hi - a.support[1])
    mat = a.matrix
    if left > 1:
        mat = np.kron(np.eye(left), mat)
    if right > 1:
        mat = np.kron(mat, np.eye(right))
    return LocalOperator((lo, hi), mat, a.local_dim, a.geometry)


def _aligned(a: LocalOperator, b: LocalOperator, _shift_out: list | None = None) -> tuple[LocalOperator, LocalOperator]:
    _check_compatible(a, b)
    support, shift = _merged_support(a, b)
    if _shift_out is not None:
        _shift_out.append(shift)
    geom = a.geometry or b.geometry
    if shift is None:
        R = geom.sites
        ma, mb = _full_ring(a, support[0], R), _full_ring(b, support[0], R)
    else:
        bs = (b.support[0] + shift, b.support[1] + shift)
        ma = tensor_embed(LocalOperator(a.support, a.matrix, a.local_dim), support).matrix
        mb = tensor_embed(LocalOperator(bs, b.matrix, b.local_dim), support).matrix
    if geom is not None:
        support = geom.canonical(support)
    return (
        LocalOperator(support, ma, a.local_dim, geom),
        LocalOperator(support, mb, a.local_dim, geom),
    )


def multiply(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """Operator product on the merged support."""
    ea, eb = _aligned(a, b)
    return LocalOperator(ea.support, ea.matrix @ eb.matrix, ea.local_dim, ea.geometry)


def commutator(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """``ab - ba`` on the merged support.

    Operators with disjoint supports give an exactly zero matrix: the
    embedded factors act on different tensor slots, so both products are the
    same Kronecker product entry by entry.
    """
    shift: list = []
    ea, eb = _aligned(a, b, shift)
    if shift[0] is not None and (a.support[1] < b.support[0] + shift[0] or b.support[1] + shift[0] < a.support[0]):
        return LocalOperator(ea.support, np.zeros_like(ea.matrix), ea.local_dim, ea.geometry)
    m = ea.matrix @ eb.matrix - eb.matrix @ ea.matrix
    return LocalOperator(ea.support, m, ea.local_dim, ea.geometry)


def operator_norm(a: LocalOperator | np.ndarray) -> float:
    """Largest singular value."""
    m = a.matrix if isinstance(a, LocalOperator) else np.asarray(a)
    if m.size == 0:
        return 0.0
    if max_abs(m - m.conj().T) <= 1e-14 * max(1.0, max_abs(m)):
        return float(np.max(np.abs(np.linalg.eigvalsh(m))))
    return float(np.linalg.norm(m, 2))


def adjoint(a: LocalOperator) -> LocalOperator:
    return LocalOperator(a.support, a.matrix.conj().T, a.local_dim, a.geometry)


def translate(a: LocalOperator, x: int) -> LocalOperator:
    """Space translation ``τ_x``: same matrix, support shifted by ``x``."""
    support = (a.support[0] + x, a.support[1] + x)
    geom = a.geometry
    if geom is not None:
        geom.check_support(support)
        support = geom.canonical(support)
    return LocalOperator(support, a.matrix, a.local_dim, geom)


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)
