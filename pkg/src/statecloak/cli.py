"""Command-line entry point.

Subcommands: worstcase-sweep, var-profile, optimize-theta, scenario, and
file-to-file encode/decode of trajectory JSON.  Every artifact-producing run
writes a manifest atomically next to its outputs.  Exit codes: 0 success,
2 usage or validation problem, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .distributions import gaussian_trajectory_prior
from .dynamics import GaussianSpec, LinearSystem, stacked_matrices
from .errors import ConfigurationError
from .harness import (MirroringScheme, evaluate_scheme, run_quadrotor,
                      run_random_walk)
from .mirroring import AffineMirror, MirrorSchedule
from .worstcase import (GridSpec, ShiftMirrorCodec, _golden_section_min,
                        decode_trajectory, encode_trajectory, optimize_theta,
                        var_profile, worst_case_distortion)

_SCHEMA_VERSION = 1
# all package errors subclass ValueError; KeyError/TypeError cover malformed
# config documents
_USAGE_ERRORS = (ValueError, TypeError, KeyError)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_manifest(path: str, command: str, config, seed, out_dir: str,
                    artifacts: list, started: float) -> None:
    doc = {
        "command": command,
        "config": None if config is None else str(config),
        "seed": seed,
        "out_dir": str(out_dir),
        "artifacts": [str(a) for a in artifacts],
        "duration_seconds": time.monotonic() - started,
    }
    _write_atomic(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_table(path: str, header: list, rows: list, fmt: str) -> None:
    if fmt == "json":
        doc = [dict(zip(header, row)) for row in rows]
        _write_atomic(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def _grid_from_args(args) -> GridSpec:
    return GridSpec(zmax=args.zmax, step=args.zstep)


def cmd_worstcase_sweep(args) -> int:
    started = time.monotonic()
    if args.theta_step <= 0 or args.theta_min > args.theta_max \
            or args.theta_min <= 0:
        raise ConfigurationError(
            f"empty theta range [{args.theta_min}, {args.theta_max}] "
            f"step {args.theta_step}")
    grid = _grid_from_args(args)
    thetas = np.arange(args.theta_min, args.theta_max + args.theta_step / 2,
                       args.theta_step)

    def dw(theta: float) -> float:
        return worst_case_distortion(
            ShiftMirrorCodec(k=args.k, theta=float(theta)), grid=grid)

    values = np.array([dw(th) for th in thetas])
    best = int(np.argmax(values))
    lo = thetas[max(best - 1, 0)]
    hi = thetas[min(best + 1, thetas.size - 1)]
    theta_star, dw_star = float(thetas[best]), float(values[best])
    if hi > lo:
        refined_theta, neg = _golden_section_min(lambda t: -dw(t), lo, hi, 1e-3)
        if -neg > dw_star:
            theta_star, dw_star = float(refined_theta), float(-neg)

    rows = [(float(th), float(v)) for th, v in zip(thetas, values)]
    _write_table(args.out, ["theta", "D_W"], rows, args.format)
    _write_manifest(f"{args.out}.manifest.json", "worstcase-sweep", None, None,
                    os.path.dirname(os.path.abspath(args.out)), [args.out],
                    started)
    print(f"k={args.k} theta_star={_fmt(theta_star)} D_W_star={_fmt(dw_star)}")
    return 0


def cmd_var_profile(args) -> int:
    started = time.monotonic()
    if args.z_step <= 0 or args.z_min > args.z_max:
        raise ConfigurationError(
            f"empty z range [{args.z_min}, {args.z_max}] step {args.z_step}")
    codec = ShiftMirrorCodec(k=args.k, theta=args.theta)
    zs = list(np.arange(args.z_min, args.z_max + args.z_step / 2, args.z_step))
    # window boundaries are where the codec switches branches; always include
    # them so the half-open window is visible in the table
    for edge in (-codec.theta, codec.theta):
        if args.z_min <= edge <= args.z_max and \
                min(abs(z - edge) for z in zs) > 1e-12:
            zs.append(edge)
    zs = np.array(sorted(zs))
    vars_ = var_profile(zs, codec)
    rows = [(float(z), float(v)) for z, v in zip(zs, vars_)]
    _write_table(args.out, ["z", "var"], rows, args.format)
    _write_manifest(f"{args.out}.manifest.json", "var-profile", None, None,
                    os.path.dirname(os.path.abspath(args.out)), [args.out],
                    started)
    print(f"k={args.k} theta={_fmt(args.theta)} "
          f"profile_min={_fmt(vars_.min())}")
    return 0


def cmd_optimize_theta(args) -> int:
    started = time.monotonic()
    grid = _grid_from_args(args)
    rows = []
    for k in args.k:
        theta_star, dw_star = optimize_theta(k, grid=grid)
        rows.append((k, float(theta_star), float(dw_star)))
        print(f"k={k} theta_star={_fmt(theta_star)} D_W_star={_fmt(dw_star)}")
    _write_table(args.out, ["k", "theta_star", "D_W_star"], rows, args.format)
    _write_manifest(f"{args.out}.manifest.json", "optimize-theta", None, None,
                    os.path.dirname(os.path.abspath(args.out)), [args.out],
                    started)
    return 0


def _expect_keys(doc: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown fields in {where}: {unknown}")


def _schedule_from_scheme(scheme: dict, dim: int, times: int,
                          default_S, default_b) -> MirrorSchedule:
    _expect_keys(scheme, {"S", "b"}, "scheme")
    S = np.asarray(scheme.get("S", default_S), dtype=float)
    b = np.asarray(scheme.get("b", default_b), dtype=float)
    return MirrorSchedule.constant(AffineMirror(S=S, b=b), times)


def _run_scenario_config(doc: dict, seed_override=None):
    _expect_keys(doc, {"schema_version", "scenario", "system", "prior",
                       "scheme", "samples", "seed"}, "config")
    if doc.get("schema_version") != _SCHEMA_VERSION:
        raise ConfigurationError(
            f"schema_version must be {_SCHEMA_VERSION}, "
            f"got {doc.get('schema_version')!r}")
    scenario = doc.get("scenario")
    system = doc.get("system", {})
    prior = doc.get("prior", {})
    scheme = doc.get("scheme", {})
    samples = int(doc.get("samples", 0))
    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)

    if scenario == "random-walk":
        _expect_keys(system, set(), "system (random-walk has a fixed model)")
        _expect_keys(prior, {"a", "T"}, "prior")
        a, T = int(prior["a"]), int(prior["T"])
        schedule = _schedule_from_scheme(scheme, 1, T, [[1.0]], [0.0])
        return run_random_walk(a=a, T=T, schedule=schedule)

    if scenario == "quadrotor":
        _expect_keys(system, {"state_weight"}, "system")
        _expect_keys(prior, {"corpus_size", "T", "Ts", "bin_width",
                             "antithetic"}, "prior")
        T = int(prior.get("T", 10))
        schedule = _schedule_from_scheme(
            scheme, 3, T, [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0, 0.0])
        return run_quadrotor(
            corpus_size=int(prior.get("corpus_size", 50_000)),
            T=T, Ts=float(prior.get("Ts", 0.5)),
            bin_width=float(prior.get("bin_width", 0.2)),
            schedule=schedule,
            state_weight=float(system.get("state_weight", 10.0)),
            seed=seed, antithetic=bool(prior.get("antithetic", True)))

    if scenario == "gaussian-mirroring":
        _expect_keys(system, {"A", "B", "T"}, "system")
        _expect_keys(prior, {"x1_mean", "x1_cov", "input_mean", "input_cov"},
                     "prior")
        _expect_keys(scheme, set(), "scheme (mirrors pass through the means)")
        if samples < 2:
            raise ConfigurationError(
                "gaussian-mirroring runs Monte Carlo; set samples >= 2")
        lin = LinearSystem(A=np.asarray(system["A"], dtype=float),
                           B=np.asarray(system["B"], dtype=float))
        T = int(system["T"])
        m = lin.m
        input_prior = GaussianSpec(
            mean=np.full((T - 1) * m, float(prior.get("input_mean", 0.0))),
            cov=np.eye((T - 1) * m) * float(prior.get("input_cov", 1.0)))
        x1_spec = GaussianSpec(
            mean=np.asarray(prior.get("x1_mean", [0.0] * lin.n), dtype=float),
            cov=np.atleast_2d(np.asarray(prior.get("x1_cov", np.eye(lin.n)),
                                         dtype=float)))
        dist = gaussian_trajectory_prior(stacked_matrices(lin, T),
                                         input_prior, x1_spec)
        mirrors = [AffineMirror(S=np.eye(dist.dim), b=mu)
                   for mu, _ in dist.per_time_moments()]
        report = evaluate_scheme(dist, MirroringScheme(MirrorSchedule(mirrors)),
                                 mode="mc", samples=samples, seed=seed)
        report.metadata["scenario"] = "gaussian-mirroring"
        return report

    raise ConfigurationError(
        f"unknown scenario {scenario!r}; expected one of "
        "'random-walk', 'quadrotor', 'gaussian-mirroring'")


def cmd_scenario(args) -> int:
    started = time.monotonic()
    with open(args.config) as fh:
        doc = json.load(fh)
    if args.samples is not None:
        doc["samples"] = args.samples
    report = _run_scenario_config(doc, seed_override=args.seed)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.json")
    table_path = os.path.join(args.out, "per_time.csv")
    _write_atomic(report_path, report.to_json() + "\n")
    _write_atomic(table_path, report.per_time_csv())
    _write_manifest(os.path.join(args.out, "manifest.json"), "scenario",
                    args.config, args.seed, args.out,
                    [report_path, table_path], started)
    print(f"scenario={report.metadata.get('scenario', '?')} "
          f"D_E={_fmt(report.D_E)} D_W={_fmt(report.D_W)} "
          f"D_E_max={_fmt(report.D_E_max)}")
    return 0


def _load_codec_config(path: str):
    with open(path) as fh:
        doc = json.load(fh)
    _expect_keys(doc, {"system", "codec", "init_prior"}, "codec config")
    system = LinearSystem.from_dict(doc["system"])
    codec = ShiftMirrorCodec(k=int(doc["codec"]["k"]),
                             theta=float(doc["codec"]["theta"]))
    _expect_keys(doc["init_prior"], {"mean", "cov"}, "init_prior")
    init_prior = GaussianSpec(
        mean=np.asarray(doc["init_prior"]["mean"], dtype=float),
        cov=np.atleast_2d(np.asarray(doc["init_prior"]["cov"], dtype=float)))
    return system, codec, init_prior


def _load_keys(path: str) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    keys = doc["keys"] if isinstance(doc, dict) else doc
    return np.asarray([int(k) for k in keys], dtype=np.int64)


def cmd_encode(args) -> int:
    started = time.monotonic()
    system, codec, init_prior = _load_codec_config(args.config)
    keys = _load_keys(args.keys)
    with open(args.infile) as fh:
        states = np.asarray(json.load(fh)["states"], dtype=float)
    Z = encode_trajectory(system, states, keys, init_prior, codec)
    _write_atomic(args.out, json.dumps(
        {"codewords": Z.tolist()}, sort_keys=True, indent=2) + "\n")
    _write_manifest(f"{args.out}.manifest.json", "encode", args.config, None,
                    os.path.dirname(os.path.abspath(args.out)), [args.out],
                    started)
    return 0


def cmd_decode(args) -> int:
    started = time.monotonic()
    system, codec, init_prior = _load_codec_config(args.config)
    keys = _load_keys(args.keys)
    with open(args.infile) as fh:
        Z = np.asarray(json.load(fh)["codewords"], dtype=float)
    states = decode_trajectory(Z, keys, system, init_prior, codec)
    _write_atomic(args.out, json.dumps(
        {"states": states.tolist()}, sort_keys=True, indent=2) + "\n")
    _write_manifest(f"{args.out}.manifest.json", "decode", args.config, None,
                    os.path.dirname(os.path.abspath(args.out)), [args.out],
                    started)
    return 0


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--zmax", type=float, default=6.0,
                   help="codeword search half-range (default 6.0)")
    p.add_argument("--zstep", type=float, default=1e-3,
                   help="codeword search step (default 1e-3)")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--parallelism", type=int,
                   default=os.cpu_count() or 1,
                   help="worker hint recorded in provenance; evaluation is "
                        "vectorized and deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statecloak",
        description="distortion-based encryption of linear-system state "
                    "trajectories")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("worstcase-sweep",
                       help="D_W as a function of theta for fixed k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--theta-min", type=float, required=True)
    p.add_argument("--theta-max", type=float, required=True)
    p.add_argument("--theta-step", type=float, default=0.05)
    p.add_argument("--out", required=True)
    _add_grid_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_worstcase_sweep)

    p = sub.add_parser("var-profile",
                       help="eavesdropper posterior variance per codeword")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--z-min", type=float, default=-6.0)
    p.add_argument("--z-max", type=float, default=6.0)
    p.add_argument("--z-step", type=float, default=0.01)
    p.add_argument("--out", required=True)
    _add_common_flags(p)
    p.set_defaults(func=cmd_var_profile)

    p = sub.add_parser("optimize-theta",
                       help="best window half-width per key bit count")
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--out", required=True)
    _add_grid_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_optimize_theta)

    p = sub.add_parser("scenario", help="run a configured end-to-end scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--samples", type=int, default=None,
                   help="override the config sample count")
    _add_common_flags(p)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("encode", help="encode a trajectory JSON file")
    p.add_argument("infile")
    p.add_argument("--config", required=True,
                   help="JSON with system, codec, init_prior")
    p.add_argument("--keys", required=True, help="JSON key file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a codeword JSON file")
    p.add_argument("infile")
    p.add_argument("--config", required=True,
                   help="JSON with system, codec, init_prior")
    p.add_argument("--keys", required=True, help="JSON key file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _USAGE_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:                      # last-resort runtime guard
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
