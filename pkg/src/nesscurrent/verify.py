"""Operator-identity suite for a model.

Each check builds both sides of an identity as explicit local matrices and
records the largest entrywise residual.  A check passes when the residual is
at most ``rel · max(1, ||A|| ||B||)`` for the pair of operators entering the
commutator (``rel = 1e-12``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .algebra import LatticeGeometry, LocalOperator, _aligned, commutator, max_abs, operator_norm
from .models import (
    ModelSpec,
    bond,
    bond_charge_violation,
    charge,
    current,
    energy_current,
    region_charge,
    region_hamiltonian,
)

__all__ = ["IdentityCheck", "run_identity_suite"]


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    where: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _difference(lhs: LocalOperator, rhs: LocalOperator) -> float:
    a, b = _aligned(lhs, rhs)
    return max_abs(a.matrix - b.matrix)


def _tol(a, b, rel: float) -> float:
    return rel * max(1.0, operator_norm(a) * operator_norm(b))


def _chain_checks(model: ModelSpec, sites: int, rel: float):
    """Identities on the open chain of ``sites`` sites around the origin."""
    first = -(sites // 2)
    last = first + sites - 1
    geom = LatticeGeometry.open(first, last, model.local_dim)
    where = f"open[{first},{last}]"

    yield IdentityCheck("bond-charge commutation", "single bond", bond_charge_violation(model.bond, model.charge), rel * max(1.0, operator_norm(model.bond)))

    for length in range(2, min(6, sites) + 1):
        lam = (first, first + length - 1)
        N, H = region_charge(model, lam, geom), region_hamiltonian(model, lam, geom)
        yield IdentityCheck(f"region conservation |Λ|={length}", where, max_abs(commutator(N, H).matrix), _tol(N, H, rel))

    for x in range(first, last):
        h = bond(model, x, geom)
        alt = commutator(charge(model, x, geom), h).scale(1j)
        j = current(model, x, geom)
        yield IdentityCheck(f"current equality x={x}", where, _difference(j, alt), _tol(charge(model, x, geom), h, rel))

    # continuity: -i[N_{[-L,0]}, H_Λ] = j_{-L-1,-L} - j_{0,1} for any Λ reaching
    # two bonds past both edges (the outermost bonds must drop out)
    for L in range(0, -first - 1):
        N = region_charge(model, (-L, 0), geom)
        H = region_hamiltonian(model, (max(first, -L - 3), min(last, 3)), geom)
        lhs = commutator(N, H).scale(-1j)
        rhs = current(model, -L - 1, geom) - current(model, 0, geom)
        yield IdentityCheck(f"continuity L={L}", where, _difference(lhs, rhs), _tol(N, H, rel))

    # energy-current decomposition, spacelike and Jacobi vanishing; each check
    # is translated by c so that its leftmost site is the chain's first site
    for M in (1, 2):
        c = first + M + 1
        if M + 2 + c > last:
            continue
        Hi = region_hamiltonian(model, (-M + c, M + 1 + c), geom)
        Ho = region_hamiltonian(model, (-M - 1 + c, M + 2 + c), geom)
        lhs = commutator(Hi, Ho).scale(1j)
        rhs = energy_current(model, M + 1 + c, geom) - energy_current(model, -M + c, geom)
        yield IdentityCheck(f"energy-current decomposition M={M}", where, _difference(lhs, rhs), _tol(Hi, Ho, rel))
    for M in (1, 2):
        for L in range(M, sites - M - 2):
            c = first + L
            N = region_charge(model, (-L + c, c), geom)
            H = region_hamiltonian(model, (-M + c, M + 1 + c), geom)
            yield IdentityCheck(
                f"current rewrite L={L} M={M}", where, _difference(commutator(N, H).scale(1j), current(model, c, geom)), _tol(N, H, rel)
            )
            Jr = energy_current(model, M + 1 + c, geom)
            yield IdentityCheck(f"spacelike [N,J_(M+1)] L={L} M={M}", where, max_abs(commutator(N, Jr).matrix), _tol(N, Jr, rel))
            # at L == M the outer region also cuts the bond (-M-1, -M), so the
            # Jacobi argument picks up j_{-M-1,-M} and the commutator is nonzero
            if L > M:
                Jl = energy_current(model, -M + c, geom)
                yield IdentityCheck(f"Jacobi [N,J_(-M)] L={L} M={M}", where, max_abs(commutator(N, Jl).matrix), _tol(N, Jl, rel))


def _ring_checks(model: ModelSpec, sites: int, rel: float):
    """Region identities placed across the seam of a ring."""
    geom = LatticeGeometry.ring(sites, model.local_dim)
    where = f"ring[{sites}]"
    for M in (1, 2):
        if 2 * M + 4 > sites:
            continue
        # regions straddle site 0 == site R
        shift = sites - 1
        Hi = region_hamiltonian(model, (-M + shift, M + 1 + shift), geom)
        Ho = region_hamiltonian(model, (-M - 1 + shift, M + 2 + shift), geom)
        lhs = commutator(Hi, Ho).scale(1j)
        rhs = energy_current(model, M + 1 + shift, geom) - energy_current(model, -M + shift, geom)
        yield IdentityCheck(f"energy-current decomposition M={M}", where, _difference(lhs, rhs), _tol(Hi, Ho, rel))
    for length in range(2, min(6, sites - 1) + 1):
        lam = (sites - 1, sites - 2 + length)
        N, H = region_charge(model, lam, geom), region_hamiltonian(model, lam, geom)
        yield IdentityCheck(f"region conservation |Λ|={length}", where, max_abs(commutator(N, H).matrix), _tol(N, H, rel))


def run_identity_suite(model: ModelSpec, sites: int = 8, rel: float = 1e-12) -> list[IdentityCheck]:
    """All operator identities for ``model`` on an open chain and a ring of ``sites`` sites."""
    if sites < 6:
        raise ValueError("the identity suite needs at least 6 sites")
    return list(_chain_checks(model, sites, rel)) + list(_ring_checks(model, sites, rel))
