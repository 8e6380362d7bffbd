"""Acceptance criteria at desk scale.

Each test records one ``PASS``/``FAIL`` line (criterion number, measured
values, runtime) that is printed in the terminal summary; the assertions use
the same tolerances and runtime budgets.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import erf

from nesscurrent import bounds, ed
from nesscurrent import freefermion as ff
from nesscurrent import sumrule as sr
from nesscurrent.algebra import LatticeGeometry
from nesscurrent.cli import ring_for, run
from nesscurrent.models import bond, builtin, charge
from nesscurrent.verify import run_identity_suite

XXZ = builtin("xxz", {"lambda": 1.0})
FERMION = builtin("fermion", t=1.0, mu=0.0, v=0.0)
FILLING, BOOST = 0.5, math.pi / 8
WINDOW = sr.TestWindow.gaussian(1.5, 6.0, 0.05)


def _record(log, number, title, passed, detail, seconds, budget):
    status = "PASS" if passed else "FAIL"
    log(f"[{number}] {status} {title}: {detail} ({seconds:.1f} s, budget {budget:.0f} s)")


def _expected_current(R):
    """Reference ω(j_{0,1}) summed directly over the sea (edge momenta at half weight)."""
    k = 2 * np.pi * np.arange(-(R // 2) + 1, R // 2 + 1) / R
    d = np.abs((k - BOOST + np.pi) % (2 * np.pi) - np.pi)
    n = np.where(np.isclose(d, np.pi * FILLING), 0.5, (d < np.pi * FILLING).astype(float))
    return 2.0 / R * np.sum(np.sin(k) * n)


@pytest.fixture(scope="module")
def sea():
    return ff.boosted_fermi(256, FILLING, BOOST)


@pytest.fixture(scope="module")
def grid(sea):
    return sr.correlation_grid(sea, 96, WINDOW.times)


def test_criterion_1_identity_suite(acceptance_log):
    start = time.perf_counter()
    worst, count, failed = 0.0, 0, []
    for model in (XXZ, builtin("fermion", t=1.0, mu=0.0, v=0.5)):
        for sites in (6, 7, 8, 9, 10):
            for c in run_identity_suite(model, sites, rel=1e-12):
                count += 1
                worst = max(worst, c.residual)
                if not c.passed:
                    failed.append((model.name, sites, c.name))
    elapsed = time.perf_counter() - start
    passed = not failed and worst <= 1e-12 and elapsed < 10
    _record(acceptance_log, 1, "operator identities", passed, f"{count} checks, max residual {worst:.2e}", elapsed, 10)
    assert not failed, failed
    assert worst <= 1e-12 and elapsed < 10


def test_criterion_2_ed_matches_wick(acceptance_log):
    start = time.perf_counter()
    occ = ff.boosted_fermi(8, FILLING, BOOST)
    spec = ed.diagonalize(FERMION, LatticeGeometry.ring(8), boundary="fermionic")
    state = ed.occupation_density_matrix(spec, occ)
    zs = np.arange(-3, 4)
    offset = 3
    n0 = ed.center(charge(FERMION, 0), state, offset)
    worst = 0.0
    for t in (0.0, 0.5, 1.0):
        wick = ff.bond_correlations(occ, 0, zs, t)
        exact = np.array([ed.two_time(state, n0, ed.center(bond(FERMION, int(z)), state, offset), t, offset) for z in zs])
        worst = max(worst, float(np.max(np.abs(wick - exact))))
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-8 and elapsed < 60
    _record(acceptance_log, 2, "ED vs Wick correlators", passed, f"max |difference| {worst:.2e} (tol 1e-8)", elapsed, 60)
    assert passed


def test_criterion_3_light_cone(acceptance_log):
    start = time.perf_counter()
    xs = range(-5, 6)
    ts = [round(-0.5 + 0.1 * i, 12) for i in range(11)]
    prof = bounds.cone_profile(XXZ, charge(XXZ, 0), bond(XXZ, 0), xs, ts, dim_cap=2**13)
    t0 = ts.index(0.0)
    disjoint = [i for i, x in enumerate(prof.xs) if x < -1 or x > 1]
    spacelike = float(np.max(prof.measured[disjoint, t0]))
    elapsed = time.perf_counter() - start
    guard_ok = prof.guard is not None and prof.guard.passed
    passed = prof.violations == 0 and spacelike <= 1e-12 and guard_ok and elapsed < 300
    detail = (
        f"{prof.violations} violations at {int(prof.valid.sum())} valid points, t=0 spacelike max {spacelike:.1e}, "
        f"ring {prof.ring} (guard vs {prof.guard.compared_with}, diff {prof.guard.max_difference:.1e})"
    )
    _record(acceptance_log, 3, "Lieb-Robinson bound", passed, detail, elapsed, 300)
    assert passed


def test_criterion_4_z_envelope(acceptance_log):
    start = time.perf_counter()
    ts = [0.005, 0.01, 0.02]
    parts, ok = [], True
    for L, M in ((4, 2), (5, 2)):
        prof = bounds.z_profile(XXZ, L, M, ts)
        ok &= prof.holds and prof.guard is not None and prof.guard.passed
        ratio = float(np.max(prof.measured / prof.envelope))
        parts.append(f"(L,M)=({L},{M}) ring {prof.ring} max measured/Z {ratio:.1e}")
    elapsed = time.perf_counter() - start
    passed = ok and elapsed < 300
    _record(acceptance_log, 4, "Z envelope", passed, "; ".join(parts), elapsed, 300)
    assert passed


def test_criterion_5_charge_energy_sum_rule(sea, acceptance_log):
    start = time.perf_counter()
    # the target uses the independent reference current and the exact gaussian integral
    target = math.sqrt(2 * math.pi) * _expected_current(256) * 1.5 * erf(6.0 / (1.5 * math.sqrt(2)))
    results = {}
    for L in (16, 32, 64):
        results[(L, 16)] = sr.sumrule_integral(sea, L, 16, WINDOW)
    R = ring_for(16, 128, 256, WINDOW, 1.0)
    swapped = sr.sumrule_integral(ff.boosted_fermi(R, FILLING, BOOST), 16, 128, WINDOW)
    devs = [results[(L, 16)].rel_dev for L in (16, 32, 64)]
    elapsed = time.perf_counter() - start
    target_ok = abs(results[(64, 16)].target - target) <= 1e-9 * abs(target)
    converged = devs[-1] <= 0.05
    decreasing = devs[0] > devs[1] > devs[2]
    vanishing = abs(swapped.value) <= 0.05 * abs(target)
    passed = target_ok and converged and decreasing and vanishing and elapsed < 600
    detail = (
        f"rel dev at L=16/32/64 (M=16): {devs[0]:.2e}/{devs[1]:.2e}/{devs[2]:.2e}; "
        f"swapped (16,128) on ring {R}: |value| {abs(swapped.value):.1e} vs target {target:.6f}"
    )
    _record(acceptance_log, 5, "charge-energy sum rule", passed, detail, elapsed, 600)
    assert target_ok and converged and decreasing and vanishing and elapsed < 600


def test_criterion_6_term_decomposition(sea, grid, acceptance_log):
    start = time.perf_counter()
    terms = [sr.term_decomposition(grid, M, WINDOW) for M in (8, 16, 32)]
    outer = [abs(d.outer) for d in terms]
    inner = [abs(d.inner) for d in terms]
    d16 = terms[1]
    R = ring_for(128, 16, 256, WINDOW, 1.0)
    direct = sr.sumrule_integral(ff.boosted_fermi(R, FILLING, BOOST), 128, 16, WINDOW).value
    match = abs(d16.total - direct) / abs(direct)
    elapsed = time.perf_counter() - start
    decreasing = outer[0] > outer[1] > outer[2] and inner[0] > inner[1] > inner[2]
    passed = decreasing and match <= 1e-6 and elapsed < 600
    detail = (
        f"|outer| {outer[0]:.1e}/{outer[1]:.1e}/{outer[2]:.1e}, |inner| {inner[0]:.1e}/{inner[1]:.1e}/{inner[2]:.1e}; "
        f"sum vs direct L=128 rel {match:.1e}"
    )
    _record(acceptance_log, 6, "three-term decomposition", passed, detail, elapsed, 600)
    assert passed


def test_criterion_7_momentum_derivative_sum_rule(sea, grid, acceptance_log):
    start = time.perf_counter()
    res = sr.theorem_sumrule(grid, WINDOW)
    reference = abs(res.target)
    eq = ff.boosted_fermi(256, FILLING, 0.0)
    control = sr.theorem_sumrule(sr.correlation_grid(eq, 96, WINDOW.times), WINDOW)
    control_rel = abs(control.value) / reference
    elapsed = time.perf_counter() - start
    passed = res.rel_dev <= 0.10 and control_rel <= 1e-3 and elapsed < 600
    detail = f"S={res.value:.6f} vs {res.target:.6f} (rel {res.rel_dev:.1e}); equilibrium control |S|/ref {control_rel:.1e}"
    _record(acceptance_log, 7, "momentum-derivative sum rule", passed, detail, elapsed, 600)
    assert passed


def test_criterion_8_cli_determinism(tmp_path, acceptance_log):
    start = time.perf_counter()
    runs = {
        "spectrum": ("spectrum",),
        "sumrule": ("sumrule", "--L", "32", "--M", "16"),
        "cone": ("cone", "--ring", "8"),
    }
    same, codes = True, []
    for name, args in runs.items():
        outs = []
        for i in range(2):
            out = tmp_path / f"{name}-{i}"
            codes.append(run([*args, "--out", str(out)]))
            outs.append(out)
        for csv in sorted(outs[0].glob("*.csv")):
            same &= csv.read_bytes() == (outs[1] / csv.name).read_bytes()
        same &= (outs[0] / "manifest.json").read_bytes() == (outs[1] / "manifest.json").read_bytes()
    elapsed = time.perf_counter() - start
    passed = same and all(c == 0 for c in codes)
    _record(acceptance_log, 8, "CLI determinism", passed, f"byte-identical CSVs and manifests for {', '.join(runs)}", elapsed, 600)
    assert passed
