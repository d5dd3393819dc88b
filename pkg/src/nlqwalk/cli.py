"""Command-line front end.

    nlqwalk evolve          --n 101 --theta 0.25pi --chi 0.02 --out run.csv
    nlqwalk scan-chi        --n 101 --theta 0.25pi --chi 0:0.05:100 --out scan.csv
    nlqwalk threshold-curve --n 101 --theta 0.05pi:0.45pi:10 --out curve.json
    nlqwalk scaling         --n 21,41,81,161 --theta 0.25pi,pi/3 --out scaling.json
    nlqwalk phase-diagram   --n 101 --chi 0:0.5:100 --theta 0.02pi:0.48pi:60 --out grid.csv

Each command writes ``<stem>.csv``, ``<stem>.json`` (where it has structured
results) and ``<stem>.manifest.json``, ``<stem>`` being ``--out`` without
its suffix.  Exit status: 0 success, 1 error, 2 bad usage, 3 finished with
failed cells or points.
"""

from __future__ import annotations

import argparse
import logging
import math
import re
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io as nio
from .regimes import (ClassifierThresholds, ScanSpec, classify, coherence_min_curve,
                      find_critical_chi, fit_scaling, largest_jump, phase_diagram,
                      threshold_curve)
from .walk import DEFAULT_STEPS, EvenLatticeWarning, Recorder, WalkConfig, evolve

log = logging.getLogger("nlqwalk")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3

_PI_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*(?:pi|π)(?:\s*/\s*(\d+\.?\d*))?$")


def parse_angle(text: str) -> float:
    """Angle in radians from ``0.25pi``, ``pi/4``, ``2pi/3`` or a plain radian literal."""
    s = text.strip().lower()
    m = _PI_RE.match(s)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        val = coef * math.pi
        if m.group(2):
            val /= float(m.group(2))
        return val
    try:
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid angle {text!r}") from None


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None


def parse_range(text: str, scalar=_float) -> np.ndarray:
    """``start:stop:count`` (inclusive linspace), ``a,b,c`` list, or one value."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:count, got {text!r}")
        start, stop = scalar(parts[0]), scalar(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"range count must be an integer in {text!r}") from None
        if count < 1:
            raise argparse.ArgumentTypeError("range count must be >= 1")
        return np.linspace(start, stop, count)
    return np.array([scalar(p) for p in text.split(",") if p.strip()])


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def parse_epsilon(text: str):
    return None if text == "default" else _float(text)


def parse_seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=parse_seed, default=0)
    common.add_argument("--epsilon", type=parse_epsilon, default=None,
                        help="noise half-width; 'default' = 1e-3/sqrt(2N)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", type=Path, required=True)
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    classifier = argparse.ArgumentParser(add_help=False)
    classifier.add_argument("--pr-frac", type=float, default=ClassifierThresholds.pr_frac)
    classifier.add_argument("--stat-frac", type=float, default=ClassifierThresholds.stat_frac)
    classifier.add_argument("--min-frac", type=float, default=ClassifierThresholds.min_frac)
    classifier.add_argument("--osc-frac", type=float, default=ClassifierThresholds.osc_frac)

    scan = argparse.ArgumentParser(add_help=False)
    scan.add_argument("--drop-frac", type=float, default=ScanSpec.drop_frac)
    scan.add_argument("--resolution", type=float, default=ScanSpec.resolution)
    scan.add_argument("--steps", type=int, default=None,
                      help="steps per scan run (default max(1e4, 16 N^2))")

    p = _Parser(prog="nlqwalk", description="Nonlinear discrete-time quantum walks on an N-cycle.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", parents=[common, classifier], help="single trajectory")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--theta", type=parse_angle, required=True)
    e.add_argument("--chi", type=_float, default=0.0)
    e.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    e.add_argument("--transient", type=int, default=None)
    e.add_argument("--density-stride", type=int, default=10, help="0 disables density output")

    s = sub.add_parser("scan-chi", parents=[common, scan], help="C_l1^min vs chi and chi_sd")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--theta", type=parse_angle, required=True)
    s.add_argument("--chi", default="0:0.05:100", help="start:stop:count, start must be 0")

    t = sub.add_parser("threshold-curve", parents=[common, scan], help="chi_sd vs theta")
    t.add_argument("--n", type=parse_int_list, required=True, help="one size or a comma list")
    t.add_argument("--theta", default="0.05pi:0.45pi:10")
    t.add_argument("--chi", default="0:0.3:61", help="coarse scan grid 0:chi_max:count")

    c = sub.add_parser("scaling", parents=[common, scan], help="chi_sd vs N and power-law fit")
    c.add_argument("--n", type=parse_int_list, default=[21, 41, 81, 161])
    c.add_argument("--theta", default="0.25pi,pi/3")
    c.add_argument("--chi", default="0:0.3:61", help="coarse scan grid 0:chi_max:count")

    d = sub.add_parser("phase-diagram", parents=[common, classifier], help="chi-theta grid")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--chi", default="0:0.5:100")
    d.add_argument("--theta", default="0.02pi:0.48pi:60")
    d.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    d.add_argument("--transient", type=int, default=None)
    d.add_argument("--seeds", type=int, default=1, help="noise realizations per cell")
    return p


def _thresholds(args) -> ClassifierThresholds:
    return ClassifierThresholds(args.pr_frac, args.stat_frac, args.min_frac, args.osc_frac)


def _scan_spec(args) -> ScanSpec:
    grid = parse_range(args.chi)
    if grid.size < 2 or grid[0] != 0.0:
        raise ValueError("chi scan range must be start:stop:count with start 0 and count >= 2")
    return ScanSpec(chi_max=float(grid[-1]), n_coarse=int(grid.size),
                    resolution=args.resolution, drop_frac=args.drop_frac, steps=args.steps)


def _stem(out: Path) -> Path:
    return out.with_suffix("") if out.suffix else out


def _paths(out: Path) -> dict[str, Path]:
    stem = _stem(out)
    return {"csv": stem.with_name(stem.name + ".csv"),
            "json": stem.with_name(stem.name + ".json"),
            "manifest": stem.with_name(stem.name + ".manifest.json"),
            "png": stem.with_name(stem.name + ".png")}


def cmd_evolve(args, paths):
    cfg = WalkConfig(args.n, args.theta, args.chi, args.epsilon, args.seed, args.steps,
                     args.transient)
    thresholds = _thresholds(args)
    rec = evolve(cfg, Recorder(density_stride=max(args.density_stride, 0)))
    outputs = {"series": paths["csv"]}
    density_path = None
    if args.density_stride > 0:
        density_path = _stem(paths["csv"]).with_name(_stem(paths["csv"]).name + ".density.csv")
        outputs["density"] = density_path
    nio.serialize_record(rec, paths["csv"], density_path)
    try:
        label = classify(rec, thresholds).to_dict()
    except ValueError as exc:
        log.info("no regime label: %s", exc)
        label = None
    if args.plot:
        from .plotting import plot_trajectory
        outputs["figure"] = plot_trajectory(rec, paths["png"])
    result = {"regime": label, "max_norm_deviation": rec.max_norm_deviation,
              "steps": rec.n_steps, "even_n": cfg.even_n}
    return cfg.to_dict(), thresholds.to_dict(), outputs, result, 0


def cmd_scan_chi(args, paths):
    spec = _scan_spec(args)
    chis = spec.grid()
    steps = spec.steps_for(args.n)
    cmins = coherence_min_curve(args.theta, args.n, chis, steps, args.seed, args.epsilon,
                                args.threads)
    crit = find_critical_chi(args.theta, args.n, spec, args.seed, args.epsilon)
    c_max = 2 * args.n - 1
    nio.write_csv(paths["csv"], ["chi", "coherence_min", "coherence_min_frac"],
                  ([x, m, m / c_max] for x, m in zip(chis, cmins)))
    result = {"critical": crit.to_dict(), "jump": largest_jump(chis, cmins)}
    nio.write_json(paths["json"], result)
    outputs = {"curve": paths["csv"], "result": paths["json"]}
    if args.plot:
        from .plotting import plot_cmin_curve
        outputs["figure"] = plot_cmin_curve(chis, cmins, args.n, paths["png"], crit.chi_sd)
    config = {"n_sites": args.n, "theta": args.theta, "theta_pi": args.theta / math.pi,
              "seed": args.seed, "epsilon": args.epsilon, "steps": steps, "scan": spec.to_dict()}
    return config, None, outputs, {"chi_sd": crit.chi_sd}, 0


def cmd_threshold_curve(args, paths):
    spec = _scan_spec(args)
    thetas = parse_range(args.theta, parse_angle)
    curves, failed = [], 0
    for n in args.n:
        curve = threshold_curve(thetas, n, spec, args.seed, args.epsilon, args.threads)
        failed += len(curve.errors)
        curves.append(curve)
    rows = []
    for curve in curves:
        rows += [[curve.n_sites, t, t / math.pi, c, s]
                 for t, c, s in zip(curve.theta_grid, curve.chi_sd, curve.status)]
    nio.write_csv(paths["csv"], ["n_sites", "theta", "theta_pi", "chi_sd", "status"], rows)
    nio.write_json(paths["json"], {
        "curves": [dict(c.to_dict(), monotonicity_violations=c.violations()) for c in curves],
        "scan": spec.to_dict(),
    })
    outputs = {"curve": paths["csv"], "result": paths["json"]}
    if args.plot:
        from .plotting import plot_threshold_curves
        outputs["figure"] = plot_threshold_curves(curves, paths["png"])
    config = {"n_sites": args.n, "theta_pi": [float(t / math.pi) for t in thetas],
              "seed": args.seed, "epsilon": args.epsilon, "scan": spec.to_dict()}
    return config, None, outputs, None, failed


def cmd_scaling(args, paths):
    spec = _scan_spec(args)
    thetas = parse_range(args.theta, parse_angle)
    rows, fits, failed, series = [], [], 0, {}
    for theta in thetas:
        vals = []
        for n in args.n:
            try:
                res = find_critical_chi(float(theta), n, spec, args.seed, args.epsilon)
                vals.append(res.chi_sd)
                status = "ok" if res.found else "no threshold in range"
            except Exception as exc:  # recorded per point
                log.error("theta=%g N=%d failed: %s", theta, n, exc)
                vals.append(None)
                status, failed = "failed", failed + 1
            rows.append([theta, theta / math.pi, n, vals[-1], status])
        try:
            fit = fit_scaling(args.n, vals)
            fits.append({"theta": float(theta), "theta_pi": float(theta / math.pi), **fit.to_dict()})
        except ValueError as exc:
            fit = None
            fits.append({"theta": float(theta), "theta_pi": float(theta / math.pi),
                         "error": str(exc)})
            failed += 1
        series[f"θ={theta / math.pi:.4g}π"] = (args.n, [np.nan if v is None else v for v in vals], fit)
    nio.write_csv(paths["csv"], ["theta", "theta_pi", "n_sites", "chi_sd", "status"], rows)
    nio.write_json(paths["json"], {"fits": fits, "sizes": args.n, "scan": spec.to_dict()})
    outputs = {"thresholds": paths["csv"], "result": paths["json"]}
    if args.plot:
        from .plotting import plot_scaling
        outputs["figure"] = plot_scaling(series, paths["png"])
    config = {"n_sites": args.n, "theta_pi": [float(t / math.pi) for t in thetas],
              "seed": args.seed, "epsilon": args.epsilon, "scan": spec.to_dict()}
    return config, None, outputs, {"fits": fits}, failed


def cmd_phase_diagram(args, paths):
    chis = parse_range(args.chi)
    thetas = parse_range(args.theta, parse_angle)
    template = WalkConfig(args.n, float(thetas[0]), 0.0, args.epsilon, args.seed, args.steps,
                          args.transient)
    thresholds = _thresholds(args)
    grid = phase_diagram(chis, thetas, template, thresholds, args.threads, args.seeds)
    nio.serialize_grid(grid, paths["csv"], paths["json"])
    outputs = {"grid": paths["csv"], "labels": paths["json"]}
    if args.plot:
        from .plotting import plot_phase_diagram
        outputs["figure"] = plot_phase_diagram(grid, paths["png"])
    config = {"template": template.to_dict(), "chi_axis": [float(x) for x in chis],
              "theta_axis_pi": [float(t / math.pi) for t in thetas], "n_seeds": args.seeds,
              "seed_policy": "cell seed = SeedSequence([seed, chi_index, theta_index, k])"}
    return config, thresholds.to_dict(), outputs, None, len(grid.errors)


COMMANDS = {
    "evolve": cmd_evolve,
    "scan-chi": cmd_scan_chi,
    "threshold-curve": cmd_threshold_curve,
    "scaling": cmd_scaling,
    "phase-diagram": cmd_phase_diagram,
}


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    paths = _paths(args.out)
    started = time.time()
    try:
        nio.check_writable(args.out)
        if getattr(args, "threads", 1) < 1:
            raise ValueError("--threads must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("default", EvenLatticeWarning)
            config, thresholds, outputs, result, failed = COMMANDS[args.command](args, paths)
        manifest = nio.make_manifest(args.command, config, outputs, argv, thresholds,
                                     {"result": result, "failed_points": failed},
                                     started, time.time())
        nio.write_json(paths["manifest"], manifest)
    except (ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"nlqwalk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if failed:
        print(f"nlqwalk {args.command}: {failed} point(s) failed; see manifest", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
