"""Command line entry point: ``affineproj <subcommand> --config run.json``.

CSV-producing subcommands write the table to ``--out`` (or stdout) and a JSON
summary to stdout (or stderr when the table went to stdout). JSON-only
subcommands write to ``--out`` or stdout. Natural logs are used throughout
except for length-function quantities, which carry a ``_log2`` suffix.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Callable

import numpy as np

from .affine import SelfAffineIFS, chaos_game, validate_ifs
from .config import RunConfig, load_config, parse_seed
from .errors import AffineProjError, ConfigError, InputNotPositive
from .flow import equidistribution_statistic, nu_F_estimate
from .projection import EstimatorParams, lambda_max, scan_to_csv, theta_scan
from .projective import cone_contraction_rate, exceptional_set, furstenberg_sample, stationarity_residual
from .spectral import affinity_dimension_report, block_bernoulli, lyapunov_exponents

S_N_LADDER = (1, 2, 3)


def _num(x: float | None) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def build_ifs(cfg: RunConfig) -> SelfAffineIFS:
    return validate_ifs(cfg.maps, rescale_to_disk=cfg.rescale_to_disk)


def _exceptional(ifs: SelfAffineIFS) -> tuple[float | None, str | None]:
    try:
        exc = exceptional_set(ifs)
    except InputNotPositive as err:
        return None, str(err)
    return (None if exc is None else exc.theta), None


def cmd_validate(cfg: RunConfig, seed: int = 0, workers: int = 1) -> tuple[dict, str]:
    """Validation flags and the exceptional direction, as JSON and as a text report."""
    ifs = build_ifs(cfg)
    rep = ifs.report
    theta_exc, exc_err = _exceptional(ifs)
    warnings = list(rep.warnings)
    if exc_err:
        warnings.append(f"exceptional set undefined: {exc_err}")
    doc = {
        "k": ifs.k,
        "strictly_positive": ifs.strictly_positive,
        "contracting": ifs.contracting,
        "disk_invariant": ifs.disk_invariant,
        "strongly_separated": rep.strongly_separated,
        "norms": [_num(v) for v in rep.norms],
        "non_positive": list(rep.non_positive),
        "max_image_radius": _num(rep.max_image_radius),
        "rescale_factor": _num(rep.rescale_factor),
        "weights": list(cfg.resolved_weights().p),
        "exceptional": _num(theta_exc),
        "warnings": warnings,
    }
    lines = [f"maps: {ifs.k}"]
    for key in ("strictly_positive", "contracting", "disk_invariant", "strongly_separated"):
        lines.append(f"{key}: {'true' if doc[key] else 'false'}")
    lines.append("weights: " + ", ".join(f"{p:.12g}" for p in doc["weights"]))
    lines.append("exceptional: " + ("none" if theta_exc is None else f"{theta_exc:.12g}"))
    lines.extend(f"warning: {w}" for w in warnings)
    return doc, "\n".join(lines) + "\n"


def cmd_dims(cfg: RunConfig, seed: int = 0, workers: int = 1) -> dict:
    ifs = build_ifs(cfg)
    est = cfg.estimator
    weights = cfg.resolved_weights()
    dA = affinity_dimension_report(ifs)
    ly = lyapunov_exponents(ifs, weights, n_steps=est.n_steps, n_samples=est.n_samples,
                            seed=seed, workers=workers)
    ladder = [{"N": N, "s_N": _num(block_bernoulli(ifs, N).s_N)} for N in S_N_LADDER]
    return {
        "dim_A": _num(dA.value),
        "dim_A_raw": _num(dA.raw),
        "dim_A_lower": _num(dA.lower),
        "dim_A_level": dA.n,
        "dim_A_note": dA.note,
        "dim_L": _num(ly.dim_L),
        "dim_L_raw": _num(ly.dim_L_raw),
        "dim_L_std_err": _num(ly.dim_L_std_err),
        "lambda1": _num(ly.lambda1),
        "lambda2": _num(ly.lambda2),
        "lambda1_std_err": _num(ly.std_err[0]),
        "lambda2_std_err": _num(ly.std_err[1]),
        "entropy": _num(ly.entropy),
        "n_steps": ly.n_steps,
        "n_samples": ly.n_samples,
        "s_N": ladder,
        "weights": list(weights.p),
    }


def _params(cfg: RunConfig) -> EstimatorParams:
    e = cfg.estimator
    return EstimatorParams(n_atoms=e.n_atoms, depth=e.depth, r_min=e.r_min, r_max=e.r_max, n_r=e.n_r)


def cmd_scan(cfg: RunConfig, seed: int = 0, workers: int = 1) -> tuple[dict, str]:
    ifs = build_ifs(cfg)
    est = cfg.estimator
    rows = theta_scan(ifs, cfg.resolved_weights(), n_theta=est.n_theta, params=_params(cfg), seed=seed,
                      include_exceptional=est.include_exceptional, workers=workers)
    theta_exc, _ = _exceptional(ifs)
    good = [r for r in rows if not r.is_near_exceptional] or rows
    worst = min(good, key=lambda r: r.beta_hat)
    summary = {
        "min_beta": _num(worst.beta_hat),
        "argmin_theta": _num(worst.theta.theta),
        "exceptional_theta": _num(theta_exc),
        "median_beta": _num(float(np.median([r.beta_hat for r in good]))),
        "n_rows": len(rows),
        "n_near_exceptional": sum(r.is_near_exceptional for r in rows),
        "lambda_max_log2": _num(lambda_max(ifs)),
    }
    return summary, scan_to_csv(rows)


def cmd_furstenberg(cfg: RunConfig, seed: int = 0, workers: int = 1) -> tuple[dict, str]:
    ifs = build_ifs(cfg)
    est = cfg.estimator
    weights = cfg.resolved_weights()
    nu = furstenberg_sample(ifs, weights, burn_in=est.burn_in, n_atoms=est.n_atoms, seed=seed)
    summary = {
        "stationarity_residual": _num(stationarity_residual(ifs, weights, nu, n_bins=est.n_bins)),
        "rho": _num(cone_contraction_rate(ifs)),
        "n_atoms": est.n_atoms,
        "burn_in": est.burn_in,
        "n_bins": est.n_bins,
    }
    return summary, nu.to_csv()


def cmd_equidist(cfg: RunConfig, seed: int = 0, workers: int = 1) -> dict:
    ifs = build_ifs(cfg)
    est = cfg.estimator
    weights = cfg.resolved_weights()
    reference = nu_F_estimate(ifs, weights, n_samples=est.n_atoms, burn_in=est.burn_in, seed=[seed, 1])
    grid = []
    for theta0 in est.theta0:
        for I in est.I:
            d = equidistribution_statistic(ifs, weights, theta0, est.N, I, n_bins=est.n_bins, seed=seed,
                                           reference=reference)
            grid.append({"theta0": _num(theta0), "I": I, "distance": _num(d)})
    return {"N_log2": _num(est.N), "n_bins": est.n_bins, "n_reference": est.n_atoms, "distances": grid}


def cmd_render(cfg: RunConfig, seed: int = 0, workers: int = 1) -> tuple[dict, str]:
    ifs = build_ifs(cfg)
    est = cfg.estimator
    pts = chaos_game(ifs, cfg.resolved_weights(), est.n_atoms, est.depth, seed=seed)
    buf = io.StringIO()
    buf.write("x,y\n")
    for x, y in pts:
        buf.write(f"{x:.12g},{y:.12g}\n")
    summary = {
        "n_points": int(len(pts)),
        "depth": est.depth,
        "bbox": [_num(v) for v in (*pts.min(axis=0), *pts.max(axis=0))],
    }
    return summary, buf.getvalue()


TABLE_COMMANDS: dict[str, Callable[..., tuple[dict, str]]] = {
    "scan": cmd_scan, "furstenberg": cmd_furstenberg, "render": cmd_render,
}
JSON_COMMANDS: dict[str, Callable[..., dict]] = {"dims": cmd_dims, "equidist": cmd_equidist}


def _seed_arg(text: str) -> int:
    try:
        return parse_seed(int(text), "--seed")
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _workers_arg(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise argparse.ArgumentTypeError("--workers must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affineproj",
                                     description="Dimension and projection experiments for planar self-affine measures.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=_seed_arg, default=None, metavar="U64",
                        help="override the config seed")
    common.add_argument("--workers", type=_workers_arg, default=1, metavar="N")
    common.add_argument("--out", default=None, metavar="PATH", help="output file (default stdout)")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "check contraction, positivity and disk invariance",
        "dims": "affinity and Lyapunov dimensions",
        "scan": "projected dimension estimates over directions",
        "furstenberg": "Furstenberg measure sample and stationarity residual",
        "equidist": "equidistribution distances of the time-N orbit",
        "render": "attractor point cloud",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _write(path: str | None, text: str, stream) -> None:
    if path is None:
        stream.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run(args: argparse.Namespace, stdout, stderr) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = args.out if args.out is not None else cfg.output
    try:
        if args.command == "validate":
            doc, text = cmd_validate(cfg, seed, args.workers)
            stderr.write(text)
            _write(out, dumps(doc), stdout)
        elif args.command in JSON_COMMANDS:
            _write(out, dumps(JSON_COMMANDS[args.command](cfg, seed, args.workers)), stdout)
        else:
            summary, table = TABLE_COMMANDS[args.command](cfg, seed, args.workers)
            _write(out, table, stdout)
            (stdout if out is not None else stderr).write(dumps(summary))
    except OSError as exc:
        raise ConfigError(f"cannot write output: {exc}") from None
    return 0


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run(args, stdout, stderr)
    except AffineProjError as exc:
        stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except ValueError as exc:
        # invalid parameter combinations rejected by the library
        stderr.write(f"error: {exc}\n")
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
