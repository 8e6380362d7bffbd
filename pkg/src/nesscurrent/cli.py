"""Command-line front end: ``nesscurrent {verify,cone,sumrule,spectrum}``.

Every run writes its tables, ``report.json`` and ``manifest.json`` under
``--out``.  Exit codes: 0 all criteria pass, 1 a numeric criterion failed,
2 configuration or parse error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, bounds, ed
from . import freefermion as ff
from . import io, sumrule as sr
from .algebra import DomainError, LatticeGeometry
from .config import ConfigError, RunConfig, load_config
from .models import ModelError, ModelSpec, bond, charge, random_model
from .verify import run_identity_suite

log = logging.getLogger("nesscurrent")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


@dataclass
class Outcome:
    passed: bool
    report: dict
    tables: dict = field(default_factory=dict)  # file stem -> (columns, rows)


# ---------------------------------------------------------------------------
# state and window construction


def make_window(cfg: RunConfig) -> sr.TestWindow:
    w = cfg.window
    if w.get("shape", "gaussian") == "gaussian":
        return sr.TestWindow.gaussian(float(w["sigma"]), float(w["T"]), float(w["dt"]))
    return sr.TestWindow.hann(float(w["T"]), float(w["dt"]))


def make_state(model: ModelSpec, state: dict, ring: int):
    """A Wick occupation for the free-fermion model, else an ED density matrix."""
    kind = state["kind"]
    if model.is_free_fermion:
        t, mu = model.params["t"], model.params["mu"]
        if kind == "boosted-fermi":
            return ff.boosted_fermi(ring, float(state.get("filling", 0.5)), float(state.get("boost", 0.0)), t=t, mu=mu)
        if kind == "fermi-dirac":
            return ff.fermi_dirac(ring, float(state["beta"]), float(state.get("boost", 0.0)), t=t, mu=mu)
        if kind in ("uniform", "infinite-temperature"):
            return ff.uniform_occupation(ring, float(state.get("value", 0.5)), t=t, mu=mu)
    if kind in ("boosted-fermi", "fermi-dirac", "uniform"):
        raise ConfigError(f"state kind {kind!r} needs the free-fermion model (fermion with v = 0)")
    geometry = LatticeGeometry.ring(ring, model.local_dim)
    return ed.make_state(model, geometry, kind, {k: v for k, v in state.items() if k != "kind"})


def ring_for(L: int, M: int, base: int, window: sr.TestWindow, hopping: float) -> int:
    """``base`` doubled until both regions plus a light-cone margin fit."""
    span = max(L, M) + M + 2
    margin = 2 * math.ceil(2 * abs(hopping) * window.T)
    R = base
    while span + margin > R:
        R *= 2
    return R


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(cfg: RunConfig) -> Outcome:
    model = cfg.model_spec()
    sites = cfg.ring or 8
    checks = [(model.name, c) for c in run_identity_suite(model, sites)]
    rng = np.random.default_rng(cfg.seed)
    for i in range(3):
        checks += [(f"random-{i}", c) for c in run_identity_suite(random_model(rng), 6)]
    rows = [{"model": name, **c.as_dict()} for name, c in checks]
    passed = all(c.passed for _, c in checks)
    worst = max((c.residual for _, c in checks), default=0.0)
    return Outcome(passed, {"checks": rows, "max_residual": worst, "count": len(rows)})


def cmd_cone(cfg: RunConfig) -> Outcome:
    model = cfg.model_spec()
    a, b = charge(model, 0), bond(model, 0)
    profile = bounds.cone_profile(model, a, b, cfg.xs, cfg.ts, ring=cfg.ring, dim_cap=2**13)
    rows = list(profile.rows())
    t0 = np.flatnonzero(np.abs(profile.ts) < 1e-15)
    disjoint = np.array([x < b.support[0] - a.width + 1 or x > b.support[1] for x in profile.xs])
    spacelike = float(np.max(profile.measured[np.ix_(disjoint, t0)])) if t0.size and disjoint.any() else 0.0
    velocity = bounds.fitted_velocity(profile)
    guard = profile.guard
    report = {
        "ring": profile.ring,
        "guard": None if guard is None else {"ring": guard.ring, "compared_with": guard.compared_with, "max_difference": guard.max_difference, "passed": guard.passed},
        "violations": profile.violations,
        "valid_points": int(profile.valid.sum()),
        "spacelike_max_at_t0": spacelike,
        "fitted_velocity": velocity,
        "bound_velocity_2V": 2 * profile.params.V,
    }
    passed = profile.violations == 0 and spacelike <= 1e-12
    return Outcome(passed, report, {"cone": (io.CSV_COLUMNS["cone"], rows)})


def _row_status(L: int, M: int) -> str:
    if M > L:
        return "expected-vanishing"
    return "converged" if L >= 2 * M else "approach"


def cmd_sumrule(cfg: RunConfig) -> Outcome:
    model = cfg.model_spec()
    window = make_window(cfg)
    tol = cfg.tolerance if cfg.tolerance is not None else 0.05
    base = cfg.ring or 256
    hopping = model.params.get("t", 1.0)
    results, rows, states = [], [], {}
    for L, M in cfg.rows:
        R = ring_for(L, M, base, window, hopping) if model.is_free_fermion else base
        if R not in states:
            states[R] = make_state(model, cfg.state, R)
        res = sr.sumrule_integral(states[R], L, M, window)
        status = _row_status(L, M)
        ok = True
        if status == "converged":
            ok = res.rel_dev <= tol
        elif status == "expected-vanishing":
            ok = abs(res.value) <= tol * abs(res.target) if res.target != 0 else abs(res.value) <= tol
        results.append({"L": L, "M": M, "ring": R, "value": res.value, "target": res.target, "rel_dev": res.rel_dev, "status": status, "passed": ok})
        rows.append((L, M, res.value, res.target, res.rel_dev, status))
    decreasing = {}
    for M in sorted({r["M"] for r in results}):
        devs = [r["rel_dev"] for r in sorted(results, key=lambda r: r["L"]) if r["M"] == M and r["status"] != "expected-vanishing"]
        if len(devs) > 1:
            decreasing[str(M)] = all(x > y for x, y in zip(devs, devs[1:]))
    report = {"rows": results, "current": sr.current_value(next(iter(states.values()))), "window": window.describe(), "deviation_decreasing_in_L": decreasing, "tolerance": tol}
    passed = all(r["passed"] for r in results)
    return Outcome(passed, report, {"convergence": (io.CSV_COLUMNS["convergence"], rows)})


def _theorem_row(res: sr.TheoremResult):
    return (res.route, res.value, res.imag, res.target, res.rel_dev)


def cmd_spectrum(cfg: RunConfig) -> Outcome:
    model = cfg.model_spec()
    window = make_window(cfg)
    tol = cfg.tolerance if cfg.tolerance is not None else 0.10
    state = make_state(model, cfg.state, cfg.ring or 256)
    zmax = cfg.zmax if cfg.zmax is not None else sr.choose_zmax(state, window)
    grid = sr.correlation_grid(state, zmax, window.times)
    density = sr.spectral_density(grid, window)
    results = [sr.theorem_sumrule(grid, window, route=r) for r in ("spectral", "time")]
    terms = []
    for M in cfg.M:
        if grid.zmax >= M + 16:
            d = sr.term_decomposition(grid, M, window)
            terms.append((M, d.outer, d.inner, d.moment, d.total))
    main = results[0]
    scale = max(abs(main.value), abs(main.target))
    real_ok = abs(main.imag) <= 1e-8 * scale if scale > 0 else abs(main.imag) <= 1e-12
    value_ok = main.rel_dev <= tol if main.target != 0 else abs(main.value) <= 1e-8
    report = {
        "zmax": zmax,
        "current": grid.current,
        "window": window.describe(),
        "theorem": [{"route": r.route, "value": r.value, "imag": r.imag, "target": r.target, "rel_dev": r.rel_dev} for r in results],
        "real_to_1e-8": real_ok,
        "tolerance": tol,
    }
    tables = {
        "correlation": (io.CSV_COLUMNS["correlation"], list(grid.rows())),
        "spectral": (io.CSV_COLUMNS["spectral"], list(density.rows())),
        "theorem": (io.CSV_COLUMNS["theorem"], [_theorem_row(r) for r in results]),
    }
    if terms:
        tables["terms"] = (io.CSV_COLUMNS["terms"], terms)
    return Outcome(value_ok and real_ok, report, tables)


def spectrum_self_test(cfg: RunConfig) -> Outcome:
    """Transform checks on a synthetic grid ``ρ(z,t) = e^{i(k₀z - ε₀t)} e^{-z²/50}``."""
    window = make_window(cfg)
    zmax = cfg.zmax if cfg.zmax is not None else 24
    zs = np.arange(-zmax, zmax + 1)
    ts = window.times
    ks = sr.dft_momenta(len(zs))
    es = sr.dft_energies(len(ts), window.dt)
    k0, e0 = ks[len(ks) // 2 + 3], es[len(es) // 2 - 5]
    values = np.exp(1j * (k0 * zs[:, None] - e0 * ts[None, :])) * np.exp(-(zs[:, None] ** 2) / 50.0)
    grid = sr.CorrelationGrid(zs, ts, values, 1.0, "synthetic")
    density = sr.spectral_density(grid)
    i, m = np.unravel_index(np.argmax(np.abs(density.values)), density.values.shape)
    peak_ok = bool(np.isclose(density.ks[i], k0) and np.isclose(density.eps[m], e0))
    recon = float(np.max(np.abs(sr.reconstruct(density) - values)))
    spectral = sr.theorem_sumrule(grid, window, route="spectral").value
    direct = -4 * math.pi * window.dt * float(np.sum(window.values * (zs.astype(float) @ grid.reversed_time().real)))
    # the time sum can cancel by symmetry, so compare against its absolute scale
    scale = 4 * math.pi * window.dt * float(np.sum(np.abs(window.values) * (np.abs(zs) @ np.abs(values))))
    pairing = abs(spectral - direct) / scale
    report = {
        "peak": {"k": float(density.ks[i]), "eps": float(density.eps[m]), "expected_k": float(k0), "expected_eps": float(e0), "passed": peak_ok},
        "reconstruction_error": recon,
        "parseval_pairing_rel_error": pairing,
    }
    passed = peak_ok and recon <= 1e-10 and pairing <= 1e-10
    return Outcome(passed, report, {"spectral": (io.CSV_COLUMNS["spectral"], list(density.rows()))})


COMMANDS = {"verify": cmd_verify, "cone": cmd_cone, "sumrule": cmd_sumrule, "spectrum": cmd_spectrum}


# ---------------------------------------------------------------------------
# driver


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nesscurrent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", help="built-in name, 'model=xxz, lambda=1.0' stanza, or model file path")
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--ring", type=int, help="ring size")
        p.add_argument("--L", type=int, help="charge region [-L, 0]")
        p.add_argument("--M", type=int, help="energy region [-M, M+1]")
        p.add_argument("--window", choices=("gaussian", "hann"), help="test-function shape")
        p.add_argument("--sigma", type=float, help="gaussian width")
        p.add_argument("--T", type=float, help="window half-support")
        p.add_argument("--zmax", type=int, help="spatial cutoff of the correlation grid")
        p.add_argument("--dt", type=float, help="time step")
        p.add_argument("--tolerance", type=float, help="pass threshold")
        p.add_argument("--seed", type=int, help="seed for randomized checks")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "spectrum":
            p.add_argument("--self-test", action="store_true", help="validate the transforms on a synthetic grid")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("model", "out", "ring", "L", "M", "window", "sigma", "T", "zmax", "dt", "tolerance", "seed")}
    try:
        cfg = load_config(args.command, config_path=args.config, overrides=overrides)
        runner = spectrum_self_test if getattr(args, "self_test", False) else COMMANDS[args.command]
        outcome = runner(cfg)
    except (ConfigError, ModelError, DomainError) as exc:
        print(f"nesscurrent {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = [io.write_csv(out / f"{stem}.csv", cols, rows) for stem, (cols, rows) in outcome.tables.items()]
    files.append(io.write_json(out / "report.json", {"command": args.command, "passed": outcome.passed, **outcome.report}))
    config = cfg.as_dict()
    if getattr(args, "self_test", False):
        config["self_test"] = True
    io.write_manifest(out, config, cfg.digest(), files)
    print(f"nesscurrent {args.command}: {'PASS' if outcome.passed else 'FAIL'} ({out})")
    return EXIT_OK if outcome.passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
