import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nesscurrent import bounds
from nesscurrent.algebra import DomainError
from nesscurrent.models import bond, builtin, charge

XXZ = builtin("xxz", {"lambda": 1.0})


def test_lr_bound_by_hand():
    p = bounds.LRParams(V=2.0, N_plus_1=2, dA=1, dB=2, normA=0.5, normB=0.75)
    # 2 (N+1)^{dA+dB} ||A|| ||B|| dA dB e^{-(|x| - dA - dB)} e^{2V|t|}
    expected = 2 * 8 * 0.5 * 0.75 * 2 * math.exp(-(5 - 3)) * math.exp(4.0 * 0.3)
    assert bounds.lr_bound(p, 5, 0.3) == pytest.approx(expected, rel=1e-14)
    assert bounds.lr_bound(p, -5, -0.3) == pytest.approx(expected, rel=1e-14)


def test_lr_bound_domain_and_overflow():
    p = bounds.LRParams(V=400.0, N_plus_1=2, dA=1, dB=2, normA=1, normB=1)
    with pytest.raises(DomainError):
        bounds.lr_bound(p, 3, 0.0)
    assert bounds.lr_bound(p, 4, 10.0) == math.inf
    with pytest.raises(DomainError):
        bounds.LRParams(V=1.0, N_plus_1=2, dA=0, dB=1, normA=1, normB=1)


@given(st.integers(4, 30), st.floats(0, 0.5), st.floats(0, 0.5))
def test_lr_bound_monotone(x, t1, t2):
    p = bounds.LRParams.for_operators(XXZ, charge(XXZ, 0), bond(XXZ, 0))
    lo, hi = sorted((t1, t2))
    assert bounds.lr_bound(p, x, lo) <= bounds.lr_bound(p, x, hi)
    assert bounds.lr_bound(p, x + 1, hi) <= bounds.lr_bound(p, x, hi)


def test_z_envelope_properties():
    assert bounds.z_envelope(XXZ, 2, 4, 0.0) == 0.0
    vals = [bounds.z_envelope(XXZ, 2, 4, t) for t in (0.005, 0.01, 0.02)]
    assert vals[0] < vals[1] < vals[2]
    assert bounds.z_envelope(XXZ, 2, 4, -0.01) == vals[1]
    # more room on both sides tightens the envelope
    assert bounds.z_envelope(XXZ, 3, 8, 0.01) < bounds.z_envelope(XXZ, 2, 8, 0.01)
    with pytest.raises(DomainError):
        bounds.z_envelope(XXZ, 3, 2, 0.01)


def test_growth_small_and_zero_velocity_limits():
    a, b = bounds._growth(0.0, 0.3)
    assert (a, b) == (0.3, 0.045)
    a, b = bounds._growth(1e-9, 0.3)
    assert a == pytest.approx(0.3, rel=1e-8) and b == pytest.approx(0.045, rel=1e-8)


def test_small_cone_has_no_violations():
    xs = range(-4, 5)
    ts = [-0.2, 0.0, 0.2]
    prof = bounds.cone_profile(XXZ, charge(XXZ, 0), bond(XXZ, 0), xs, ts, ring=10)
    assert prof.violations == 0
    t0 = list(ts).index(0.0)
    for i, x in enumerate(prof.xs):
        if x < -1 or x > 1:  # supports {x} and {0,1} disjoint
            assert prof.measured[i, t0] <= 1e-12
    assert np.all(np.isnan(prof.bound[~prof.valid]))
    assert len(list(prof.rows())) == 27


def test_z_measurement_on_fixed_ring():
    prof = bounds.z_profile(XXZ, 4, 2, [0.0, 0.01], ring=11)
    assert prof.measured[0] < 1e-13
    assert prof.holds


def test_time_reversal_shortcut_matches_direct_evolution():
    model = builtin("xxz", {"lambda": 0.6})
    fast = bounds._ConeColumns(model, charge(model, 0), bond(model, 0), range(-3, 4))
    slow = bounds._ConeColumns(model, charge(model, 0), bond(model, 0), range(-3, 4))
    assert fast.reversible
    slow.reversible = False
    ts = [-0.4, -0.1, 0.1, 0.4]
    np.testing.assert_allclose(fast.grid(8, ts), slow.grid(8, ts), atol=1e-13)


def test_complex_couplings_are_not_time_reversed(rng):
    from nesscurrent.models import random_model

    model = random_model(rng)
    cols = bounds._ConeColumns(model, charge(model, 0), bond(model, 0), [3])
    assert not cols.reversible
