"""Command-line entry point.

Three subcommands:

  levels     per-level diagnostics (variance, mean correction, kurtosis,
             normalised cost) at fixed sample counts, one CSV row per
             (estimator, level)
  run        adaptive estimation for a list of target accuracies; writes a
             summary CSV plus a per-level sample-count CSV
  reference  print the analytic series value at a point

All randomness flows from --seed; outputs are deterministic for a fixed
manifest and seed, independent of --threads.  CSV files are written
atomically (temp file + rename) and each gets a JSON sidecar echoing the
manifest.  Flags win over the optional key=value config file.

Exit codes: 0 success, 2 configuration error, 3 simulation failure,
4 level-cap failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__, rng
from . import stats as stats_mod
from .coupling import LevelParams, collect_level_stats, split_count
from .driver import (ESTIMATORS, LevelCapError, MlmcConfig, estimator_mode, run)
from .model import ExitTimeProfile, PRESET_NAMES, problem_preset
from .paths import SimulationFailure
from .reference import SeriesTruncation, cube_exit_solution, slab_exit_solution

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_LEVEL_CAP = 4
EXIT_IO = 5

LEVELS_HEADER = ("estimator,level,h,N,mean_diff,var_diff,mean_fine,var_fine,"
                 "kurtosis,cost_per_sample,normalized_cost")
RUN_HEADER = "estimator,eps,estimate,error,chosen_L,total_cost,eps2_cost"
SAMPLES_HEADER = "estimator,eps,level,h,N"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one CLI invocation."""

    subcommand: str
    problem: str = "cube3d"
    estimators: tuple = ("new2",)
    eps: tuple = ()
    levels: tuple = ()
    samples: int = 0
    seed: int = 1
    out: str = ""
    truncation: int = 39
    refine_factor: int = 4
    h0: float = 0.1
    m_rule: str = "two_pow_ell"
    threads: int = 1
    pilot: int = 25
    l_min: int = 2
    l_max: int = 10
    payoff: str = ExitTimeProfile.TERMINAL_CLOCK
    point: tuple = (0.0, 0.0, 0.0)
    t: float = 0.0


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_with_sidecar(path: str, text: str, manifest: RunManifest) -> None:
    _atomic_write(path, text)
    meta = dataclasses.asdict(manifest)
    meta["version"] = __version__
    _atomic_write(path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _parse_levels(value: str) -> tuple:
    if ":" in value:
        lo, hi = value.split(":", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ConfigError(f"empty level range: {value!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(v) for v in value.split(","))


def _parse_estimators(value: str) -> tuple:
    names = tuple(v.strip() for v in value.split(","))
    for n in names:
        if n not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {n!r}; pick from {ESTIMATORS}")
    return names


def _f(x, spec="%.12g") -> str:
    return spec % x


def cmd_levels(manifest: RunManifest) -> int:
    if not manifest.levels:
        raise ConfigError("levels: --levels is required (e.g. 0:4)")
    if manifest.samples < 2:
        raise ConfigError("levels: --samples must be >= 2")
    spec = problem_preset(manifest.problem, manifest.payoff)
    lines = [LEVELS_HEADER]
    for est in manifest.estimators:
        mode = estimator_mode(est)
        for level in manifest.levels:
            m = 1 if est == "orig" else split_count(manifest.m_rule, level)
            params = LevelParams(level=level, h0=manifest.h0,
                                 refinement=manifest.refine_factor, split_count=m)
            st = collect_level_stats(spec, params, mode, manifest.seed,
                                     manifest.samples)
            try:
                kurt = st.kurtosis()
            except stats_mod.UndefinedKurtosisError:
                kurt = float("nan")
            lines.append(",".join([
                est, str(level), _f(params.h_fine), str(st.count),
                _f(st.mean_diff), _f(st.var_diff), _f(st.mean_fine),
                _f(st.var_fine), _f(kurt), _f(st.mean_cost),
                _f(stats_mod.normalized_cost(st, spec, params.h_fine)),
            ]))
    _write_with_sidecar(manifest.out, "\n".join(lines) + "\n", manifest)
    print(f"wrote {manifest.out} ({len(lines) - 1} rows)")
    return EXIT_OK


def _analytic_reference(problem: str) -> float:
    if problem == "cube3d":
        return cube_exit_solution(np.zeros(3), 0.0)
    if problem == "cube1d":
        return slab_exit_solution(0.0, 0.0)
    return float("nan")


def _samples_csv_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return f"{stem}_samples{ext or '.csv'}"


def cmd_run(manifest: RunManifest) -> int:
    if not manifest.eps:
        raise ConfigError("run: --eps is required (e.g. 0.04,0.02,0.01)")
    spec = problem_preset(manifest.problem, manifest.payoff)
    reference = _analytic_reference(manifest.problem)
    summary = [RUN_HEADER]
    samples = [SAMPLES_HEADER]
    failures = []
    for est in manifest.estimators:
        for eps in manifest.eps:
            config = MlmcConfig(
                epsilon=eps, h0=manifest.h0, refinement=manifest.refine_factor,
                estimator=est, m_rule=manifest.m_rule, L_min=manifest.l_min,
                L_max=manifest.l_max, initial_samples=manifest.pilot,
                seed=manifest.seed)
            try:
                result = run(spec, config)
            except LevelCapError as exc:
                failures.append(f"{est} eps={eps}: {exc}")
                print(f"level-cap failure: {est} eps={eps}: {exc}", file=sys.stderr)
                continue
            summary.append(",".join([
                est, _f(eps), _f(result.estimate, "%.17g"),
                _f(result.estimate - reference), str(result.chosen_L),
                str(result.total_cost), _f(eps * eps * result.total_cost),
            ]))
            for rec in result.levels:
                samples.append(",".join([
                    est, _f(eps), str(rec.level), _f(rec.h), str(rec.n_samples)]))
    _write_with_sidecar(manifest.out, "\n".join(summary) + "\n", manifest)
    samples_path = _samples_csv_path(manifest.out)
    _write_with_sidecar(samples_path, "\n".join(samples) + "\n", manifest)
    print(f"wrote {manifest.out} ({len(summary) - 1} rows) and {samples_path}")
    return EXIT_LEVEL_CAP if failures else EXIT_OK


def cmd_reference(manifest: RunManifest) -> int:
    trunc = SeriesTruncation(manifest.truncation)
    if manifest.problem == "cube3d":
        value = cube_exit_solution(np.asarray(manifest.point[:3]), manifest.t, trunc)
    elif manifest.problem == "cube1d":
        value = slab_exit_solution(manifest.point[0], manifest.t, trunc)
    else:
        raise ConfigError(f"no analytic reference for problem {manifest.problem!r}")
    print("%.10g" % value)
    return EXIT_OK


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for line_no, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected key = value")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitmc",
        description="Multilevel Monte Carlo estimation of exit times and "
                    "Feynman-Kac functionals for stopped diffusions.")
    parser.add_argument("--version", action="version", version=f"exitmc {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    subparsers = []

    def common(p):
        p.add_argument("--config", help="optional key = value config file; flags win")
        p.add_argument("--problem", default="cube3d", choices=PRESET_NAMES)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--h0", type=float, default=0.1,
                       help="coarsest timestep (must divide the horizon)")
        p.add_argument("--refine-factor", type=int, default=4)
        p.add_argument("--m-rule", default="two_pow_ell",
                       help="split-count rule: two_pow_ell, "
                            "two_pow_ell_over_sqrt_ell, or constant:<m>")
        p.add_argument("--payoff", default=ExitTimeProfile.TERMINAL_CLOCK,
                       choices=(ExitTimeProfile.TERMINAL_CLOCK,
                                ExitTimeProfile.RUNNING_CLOCK))

    p_levels = sub.add_parser("levels", help="fixed-N per-level diagnostics")
    subparsers.append(p_levels)
    common(p_levels)
    p_levels.add_argument("--estimator", default="orig,new1,new2",
                          help="comma-separated subset of orig,new1,new2")
    p_levels.add_argument("--levels", required=True,
                          help="level list: 0:4 or 1,2,3")
    p_levels.add_argument("--samples", type=int, required=True)
    p_levels.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="adaptive runs for target accuracies")
    subparsers.append(p_run)
    common(p_run)
    p_run.add_argument("--estimator", default="new2")
    p_run.add_argument("--eps", required=True, help="comma-separated accuracies")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--pilot", type=int, default=25,
                       help="samples drawn when a level is first opened")
    p_run.add_argument("--l-min", type=int, default=2)
    p_run.add_argument("--l-max", type=int, default=10)

    p_ref = sub.add_parser("reference", help="print the analytic series value")
    subparsers.append(p_ref)
    common(p_ref)
    p_ref.add_argument("--point", default="0,0,0", help="evaluation point")
    p_ref.add_argument("--t", type=float, default=0.0)
    p_ref.add_argument("--truncation", type=int, default=39)

    if defaults:
        for p in subparsers:
            known = {k: v for k, v in defaults.items()
                     if any(a.dest == k for a in p._actions)}
            p.set_defaults(**known)
    return parser


_CONFIG_COERCERS = {
    "seed": int, "threads": int, "samples": int, "pilot": int, "l_min": int,
    "l_max": int, "refine_factor": int, "truncation": int, "h0": float,
    "t": float,
}


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    fields = {
        "subcommand": args.subcommand,
        "problem": args.problem,
        "seed": args.seed,
        "threads": args.threads,
        "h0": args.h0,
        "refine_factor": args.refine_factor,
        "m_rule": args.m_rule,
        "payoff": args.payoff,
    }
    if args.subcommand == "levels":
        fields.update(estimators=_parse_estimators(args.estimator),
                      levels=_parse_levels(args.levels),
                      samples=args.samples, out=args.out)
    elif args.subcommand == "run":
        fields.update(estimators=_parse_estimators(args.estimator),
                      eps=tuple(float(v) for v in args.eps.split(",")),
                      out=args.out, pilot=args.pilot,
                      l_min=args.l_min, l_max=args.l_max)
    else:
        fields.update(point=tuple(float(v) for v in args.point.split(",")),
                      t=args.t, truncation=args.truncation)
    return RunManifest(**fields)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)

    overrides = None
    if known.config:
        try:
            raw = _load_config_file(known.config)
            overrides = {k: _CONFIG_COERCERS.get(k, str)(v) for k, v in raw.items()}
        except (ConfigError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    parser = build_parser(overrides)

    args = parser.parse_args(argv)
    try:
        manifest = _manifest_from_args(args)
        rng.set_threads(manifest.threads)
        if manifest.subcommand == "levels":
            return cmd_levels(manifest)
        if manifest.subcommand == "run":
            return cmd_run(manifest)
        return cmd_reference(manifest)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationFailure as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
