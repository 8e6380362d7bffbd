import numpy as np
import pytest

from nesscurrent.algebra import LatticeGeometry, commutator, max_abs
from nesscurrent.models import builtin, energy_current, random_model, region_charge
from nesscurrent.verify import run_identity_suite

MODELS = {
    "xxz": builtin("xxz", {"lambda": 1.0}),
    "xxz-anisotropic": builtin("xxz", {"lambda": -0.4}),
    "fermion": builtin("fermion", t=1.0, mu=0.3, v=0.5),
    "spin-one": builtin("xxz", {"lambda": 0.5, "local_dim": 3}),
}


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("sites", [6, 8])
def test_identity_suite_passes(name, sites):
    if name == "spin-one" and sites > 6:
        pytest.skip("spin one at 6 sites is enough")
    checks = run_identity_suite(MODELS[name], sites)
    failed = [c.as_dict() for c in checks if not c.passed]
    assert not failed
    names = {c.name.split(" ")[0] for c in checks}
    assert {"bond-charge", "region", "current", "continuity", "energy-current", "spacelike", "Jacobi"} <= names


def test_random_models_pass(rng):
    for _ in range(3):
        assert all(c.passed for c in run_identity_suite(random_model(rng), 6))


def test_suite_needs_six_sites():
    with pytest.raises(ValueError):
        run_identity_suite(MODELS["xxz"], 5)


def test_jacobi_vanishing_needs_strictly_larger_charge_region():
    # with L == M the charge region's left edge sits inside the energy current's support
    model = MODELS["xxz"]
    geom = LatticeGeometry.open(-4, 4)
    J = energy_current(model, -2, geom)
    at_equal = max_abs(commutator(region_charge(model, (-2, 0), geom), J).matrix)
    beyond = max_abs(commutator(region_charge(model, (-3, 0), geom), J).matrix)
    assert at_equal == pytest.approx(0.25, abs=1e-12)
    assert beyond < 1e-13
