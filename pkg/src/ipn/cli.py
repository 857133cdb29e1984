"""Command-line front end: configs in, machine-readable reports out.

Commands: support | density | spikes | simulate | separation | verify-all.
A JSON config file is the source of record; flags override its fields.
Exit codes: 0 success, 1 validation error, 2 convergence error, 3 failed
verification assertion.  IPN_THREADS caps trial-level parallelism.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import measure, simulate, spikes as spikes_mod, stieltjes, subordination
from .errors import AmbiguousSpike, ConvergenceError, DomainError, PreconditionError
from .measure import MeasureSpec
from .simulate import SimConfig
from .spikes import SpikeSpec
from .subordination import ModelParams

DEFAULT_CHECKS = {
    "separation_min_pass": 0.95,
    "outlier_tolerance": 0.15,
    "mass_tolerance": 1e-3,
    "ks_threshold": 0.05,
    "inverse_pair_tolerance": 1e-9,
    "chain_tolerance": 1e-7,
    "h_tolerance": 1e-6,
}


@dataclass
class OutputSpec:
    path: str = "-"
    fmt: str = "json"
    timestamp: bool = True
    header: bool = False


@dataclass
class RunConfig:
    """Fully validated bundle for one command invocation."""

    command: str
    model: ModelParams
    output: OutputSpec
    spikes: SpikeSpec = field(default_factory=SpikeSpec)
    sim: SimConfig | None = None
    gap: tuple[float, float] | None = None
    checks: dict = field(default_factory=dict)
    density_points: int = 400
    spikes_n: int | None = None
    full_eigenvalues: bool = False


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = _load_json(args.config) if getattr(args, "config", None) else {}

    model_cfg = dict(cfg.get("model", {}))
    if getattr(args, "sigma", None) is not None:
        model_cfg["sigma"] = args.sigma
    if getattr(args, "c", None) is not None:
        model_cfg["c"] = args.c
    if getattr(args, "nu", None) is not None:
        model_cfg["nu"] = json.loads(args.nu)
    for key in ("sigma", "c", "nu"):
        if key not in model_cfg:
            raise ValueError(f"model field {key!r} missing (use --{key} or a config file)")
    model = ModelParams(sigma=model_cfg["sigma"], c=model_cfg["c"],
                        nu=MeasureSpec.from_dict(model_cfg["nu"]))

    spikes_cfg = cfg.get("spikes", {})
    thetas = getattr(args, "theta", None)
    if thetas:
        mults = getattr(args, "mult", None) or [1] * len(thetas)
        if len(mults) != len(thetas):
            raise ValueError("--mult must be given once per --theta")
        spike_spec = SpikeSpec(thetas=tuple(thetas), multiplicities=tuple(mults))
    else:
        spike_spec = SpikeSpec.from_dict(spikes_cfg) if spikes_cfg else SpikeSpec()

    sim_cfg = dict(cfg.get("sim", {}))
    for key in ("n", "N", "seed", "trials"):
        val = getattr(args, key if key != "N" else "big_n", None)
        if val is not None:
            sim_cfg[key] = val
    if getattr(args, "entry_dist", None) is not None:
        sim_cfg["entry_dist"] = args.entry_dist
    sim = None
    if args.command in ("simulate", "separation", "verify-all"):
        for key in ("n", "N"):
            if key not in sim_cfg:
                raise ValueError(f"sim field {key!r} missing (use --n/--N or a config file)")
        sim = SimConfig(n=sim_cfg["n"], N=sim_cfg["N"], model=model,
                        entry_dist=sim_cfg.get("entry_dist", "complex-gaussian"),
                        spikes=spike_spec, seed=sim_cfg.get("seed", 0),
                        trials=sim_cfg.get("trials", 10))

    gap = None
    if getattr(args, "gap", None) is not None:
        gap = (float(args.gap[0]), float(args.gap[1]))
    elif "separation" in cfg and "gap" in cfg["separation"]:
        raw = cfg["separation"]["gap"]
        gap = (float(raw[0]), float(raw[1]))

    checks = dict(DEFAULT_CHECKS)
    checks.update(cfg.get("checks", {}))

    output = OutputSpec(
        path=getattr(args, "output", None) or cfg.get("output", {}).get("path", "-"),
        fmt=getattr(args, "format", None) or cfg.get("output", {}).get("format", "json"),
        timestamp=not getattr(args, "no_timestamp", False),
        header=getattr(args, "header", False),
    )
    return RunConfig(command=args.command, model=model, output=output,
                     spikes=spike_spec, sim=sim, gap=gap, checks=checks,
                     density_points=getattr(args, "points", None) or 400,
                     spikes_n=getattr(args, "n", None),
                     full_eigenvalues=getattr(args, "full", False))


def _jsonable(obj):
    """Replace non-JSON floats so reports stay strictly parseable."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(text: str, out: OutputSpec) -> None:
    if out.path == "-":
        sys.stdout.write(text)
    else:
        with open(out.path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_report(report: dict, out: OutputSpec) -> None:
    if out.timestamp:
        report = dict(report)
        report["generated_at"] = datetime.datetime.now(
            datetime.timezone.utc).isoformat()
    _emit(json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n", out)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_support(rc: RunConfig) -> int:
    sup = subordination.support(rc.model)
    _emit_report({"command": "support", "model": rc.model.to_dict(),
                  "result": sup.to_dict()}, rc.output)
    return 0


def _cmd_density(rc: RunConfig) -> int:
    sup = subordination.support(rc.model)
    lo = sup.intervals[0][0]
    hi = sup.intervals[-1][1]
    xs = np.linspace(lo, hi, rc.density_points)
    if rc.model.c == 1.0:
        xs = xs[np.abs(xs) >= 1e-6]
    grid = stieltjes.density(rc.model, [float(x) for x in xs])
    if rc.output.fmt == "csv":
        lines = []
        if rc.output.header:
            lines.append("x,f")
        lines.extend(f"{x!r},{f!r}" for x, f in zip(grid.xs, grid.fs))
        _emit("\n".join(lines) + "\n", rc.output)
    else:
        _emit_report({"command": "density", "model": rc.model.to_dict(),
                      "result": {"xs": list(grid.xs), "fs": list(grid.fs),
                                 "eps_used": grid.eps_used}}, rc.output)
    return 0


def _spike_records(rc: RunConfig) -> list[dict]:
    outcomes = spikes_mod.classify(rc.model, rc.spikes)
    n = rc.spikes_n or (rc.sim.n if rc.sim else None)
    records = []
    prefix = 0
    for outcome, k in zip(outcomes, rc.spikes.multiplicities):
        if n is not None:
            start = 1 + spikes_mod._count_above(rc.model, rc.spikes, n,
                                                outcome.theta)
        else:
            # without a matrix size, rank among the spiked directions alone
            start = 1 + prefix
        rec = outcome.to_dict()
        rec["ranks"] = [start, start + k - 1]
        records.append(rec)
        prefix += k
    return records


def _cmd_spikes(rc: RunConfig) -> int:
    _emit_report({"command": "spikes", "model": rc.model.to_dict(),
                  "result": _spike_records(rc)}, rc.output)
    return 0


def _cmd_simulate(rc: RunConfig) -> int:
    samples = simulate.run_trials(rc.sim)
    lines = []
    for s in samples:
        ev = [float(x) for x in s.eigenvalues]
        rec: dict = {"trial": s.trial_index, "seed": s.seed_used}
        if rc.full_eigenvalues:
            rec["eigenvalues"] = ev
        else:
            rec["top"] = ev[:10]
            rec["bottom"] = ev[-3:]
        lines.append(json.dumps(_jsonable(rec), sort_keys=True))
    _emit("\n".join(lines) + "\n", rc.output)
    return 0


def _cmd_separation(rc: RunConfig) -> int:
    if rc.gap is None:
        raise ValueError("separation requires --gap A B or a config entry")
    report = simulate.verify_separation(rc.sim, rc.gap)
    _emit_report({"command": "separation", "model": rc.model.to_dict(),
                  "result": report.to_dict()}, rc.output)
    return 0


# ---------------------------------------------------------------------------
# verify-all
# ---------------------------------------------------------------------------

def _verification_grid(sup: subordination.SupportResult) -> list[float]:
    """Deterministic off-support probe points spanning every gap."""
    pts: list[float] = []
    span = sup.intervals[-1][1] - sup.intervals[0][0] + 1.0
    lo0 = sup.intervals[0][0]
    if lo0 > 0.0:
        pts.extend(lo0 * f for f in (0.25, 0.5, 0.75))
    pts.extend(lo0 - span * f for f in (0.25, 0.75))
    for (a_lo, a_hi), (b_lo, b_hi) in zip(sup.intervals, sup.intervals[1:]):
        width = b_lo - a_hi
        pts.extend(a_hi + width * f for f in (0.2, 0.5, 0.8))
    hi_last = sup.intervals[-1][1]
    pts.extend(hi_last + span * f for f in (0.1, 0.3, 0.8, 2.0))
    return sorted(pts)


def verify_all(rc: RunConfig) -> tuple[dict, bool]:
    """Run the consolidated verification suite; returns (report, all_pass)."""
    model = rc.model
    checks_cfg = rc.checks
    results: list[dict] = []

    sup = subordination.support(model)
    grid = _verification_grid(sup)

    worst = 0.0
    for x in grid:
        u = subordination.omega(model, x)
        worst = max(worst, abs(subordination.phi(model, u) - x) / max(1.0, abs(x)))
    tol = checks_cfg["inverse_pair_tolerance"]
    results.append({"name": "inverse_pair", "status": "pass" if worst <= tol else "fail",
                    "max_residual": worst, "tolerance": tol, "points": len(grid)})

    s2c = model.sigma ** 2 * model.c
    worst_chain = 0.0
    worst_h = 0.0
    for x in grid[:12]:
        gmu = stieltjes.solve_g(model, complex(x, 1e-9)).g
        u = subordination.omega(model, x)
        chain = abs(1.0 / (1.0 - s2c * gmu)
                    - (1.0 + s2c * measure.g_nu(model.nu, u)))
        worst_chain = max(worst_chain, chain)
        worst_h = max(worst_h, stieltjes.h_residual(model, x))
    ok = (worst_chain <= checks_cfg["chain_tolerance"]
          and worst_h <= checks_cfg["h_tolerance"])
    results.append({"name": "subordination_chain",
                    "status": "pass" if ok else "fail",
                    "max_chain_residual": worst_chain,
                    "max_h_residual": worst_h,
                    "chain_tolerance": checks_cfg["chain_tolerance"],
                    "h_tolerance": checks_cfg["h_tolerance"]})

    masses = stieltjes.interval_masses(model)
    adm = sup.admissible
    worst_mass = max(abs(m - measure.mass_between(model.nu, adm.u[l], adm.v[l]))
                     for l, m in enumerate(masses))
    tol = checks_cfg["mass_tolerance"]
    results.append({"name": "mass_equality",
                    "status": "pass" if worst_mass <= tol else "fail",
                    "max_mass_error": worst_mass, "tolerance": tol,
                    "interval_masses": list(masses)})

    if rc.sim is None:
        raise ValueError("verify-all requires a sim section")

    gap = rc.gap
    if gap is None and len(sup.intervals) >= 2:
        widest = max(
            ((a_hi, b_lo) for (_, a_hi), (b_lo, _) in
             zip(sup.intervals, sup.intervals[1:])),
            key=lambda g: g[1] - g[0])
        width = widest[1] - widest[0]
        gap = (widest[0] + 0.3 * width, widest[1] - 0.3 * width)
    if gap is not None:
        rep = simulate.verify_separation(rc.sim, gap)
        ok = rep.pass_fraction >= checks_cfg["separation_min_pass"]
        results.append({"name": "separation", "status": "pass" if ok else "fail",
                        "pass_fraction": rep.pass_fraction, "i_N": rep.i_N,
                        "gap": list(gap),
                        "min_pass": checks_cfg["separation_min_pass"]})
    else:
        results.append({"name": "separation", "status": "skipped",
                        "reason": "single support interval and no configured gap"})

    samples = simulate.run_trials(rc.sim)

    if rc.spikes.thetas:
        outcomes = spikes_mod.classify(model, rc.spikes)
        tol = checks_cfg["outlier_tolerance"]
        spike_rows = []
        ok = True
        for outcome in outcomes:
            rank_lo = 1 + spikes_mod._count_above(model, rc.spikes, rc.sim.n,
                                                  outcome.theta)
            observed = float(np.median(
                [s.eigenvalues[rank_lo - 1] for s in samples]))
            err = abs(observed - outcome.limit)
            good = err <= tol
            ok = ok and good
            spike_rows.append({"theta": outcome.theta, "case": outcome.case_tag,
                               "limit": outcome.limit, "rank": rank_lo,
                               "median_observed": observed, "error": err})
        results.append({"name": "outlier", "status": "pass" if ok else "fail",
                        "tolerance": tol, "spikes": spike_rows})
    else:
        results.append({"name": "outlier", "status": "skipped",
                        "reason": "no spikes configured"})

    pooled = np.sort(np.concatenate([s.eigenvalues for s in samples]))
    mcount = len(pooled)
    model_cdf = np.array([stieltjes.cdf_mu(model, float(x)) for x in pooled])
    ks = float(max(np.max(np.arange(1, mcount + 1) / mcount - model_cdf),
                   np.max(model_cdf - np.arange(0, mcount) / mcount)))
    tol = checks_cfg["ks_threshold"]
    results.append({"name": "ks", "status": "pass" if ks <= tol else "fail",
                    "distance": ks, "threshold": tol, "pooled": mcount})

    all_pass = all(r["status"] != "fail" for r in results)
    report = {
        "command": "verify-all",
        "model": model.to_dict(),
        "spikes": rc.spikes.to_dict(),
        "sim": {"n": rc.sim.n, "N": rc.sim.N, "entry_dist": rc.sim.entry_dist,
                "seed": rc.sim.seed, "trials": rc.sim.trials},
        "checks": results,
        "all_pass": all_pass,
    }
    return report, all_pass


def _cmd_verify_all(rc: RunConfig) -> int:
    report, all_pass = verify_all(rc)
    for row in report["checks"]:
        print(f"{row['status'].upper():7s} {row['name']}", file=sys.stderr)
    _emit_report(report, rc.output)
    return 0 if all_pass else 3


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are validation errors
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file (source of record)")
    sp.add_argument("--sigma", type=float, help="noise scale")
    sp.add_argument("--c", type=float, help="dimension ratio in (0, 1]")
    sp.add_argument("--nu", help='measure JSON, e.g. {"atoms":[{"w":1,"t":1}]}')
    sp.add_argument("--output", help="output path (default stdout)")
    sp.add_argument("--format", choices=("json", "csv"))
    sp.add_argument("--no-timestamp", action="store_true",
                    help="omit the timestamp for byte-identical reruns")
    sp.add_argument("--header", action="store_true", help="CSV column header")


def _add_sim(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int)
    sp.add_argument("--N", dest="big_n", type=int)
    sp.add_argument("--entry-dist", choices=simulate.ENTRY_DISTS)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipn",
                     description="Spectral analysis of information-plus-noise models")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("support", help="support intervals of the limit law")
    _add_common(sp)

    sp = sub.add_parser("density", help="density grid of the limit law")
    _add_common(sp)
    sp.add_argument("--points", type=int, default=400)

    sp = sub.add_parser("spikes", help="classify spikes and predict limits")
    _add_common(sp)
    sp.add_argument("--theta", type=float, action="append")
    sp.add_argument("--mult", type=int, action="append")
    sp.add_argument("--n", type=int, help="matrix size for rank resolution")

    sp = sub.add_parser("simulate", help="sample eigenvalues (JSON lines)")
    _add_common(sp)
    _add_sim(sp)
    sp.add_argument("--theta", type=float, action="append")
    sp.add_argument("--mult", type=int, action="append")
    sp.add_argument("--full", action="store_true",
                    help="emit all eigenvalues per trial")

    sp = sub.add_parser("separation", help="exact-separation Monte Carlo check")
    _add_common(sp)
    _add_sim(sp)
    sp.add_argument("--theta", type=float, action="append")
    sp.add_argument("--mult", type=int, action="append")
    sp.add_argument("--gap", type=float, nargs=2, metavar=("A", "B"))

    sp = sub.add_parser("verify-all", help="consolidated verification suite")
    _add_common(sp)
    _add_sim(sp)
    sp.add_argument("--theta", type=float, action="append")
    sp.add_argument("--mult", type=int, action="append")
    sp.add_argument("--gap", type=float, nargs=2, metavar=("A", "B"))

    return parser


_DISPATCH = {
    "support": _cmd_support,
    "density": _cmd_density,
    "spikes": _cmd_spikes,
    "simulate": _cmd_simulate,
    "separation": _cmd_separation,
    "verify-all": _cmd_verify_all,
}


def run(argv: list[str] | None = None) -> int:
    """Parse arguments, execute the command, and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _resolve(args)
        return _DISPATCH[rc.command](rc)
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, PreconditionError, AmbiguousSpike, ValueError,
            KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
