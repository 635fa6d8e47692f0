"""Command-line entry point: ``spreadnuts {sample,bench,islands}``.

Exit codes: 0 success, 1 a sampler failed (partial results are still
written), 2 usage or configuration error.

Every random stream is derived from ``--seed``: unit ``i`` of a run (trial
``i`` of ``bench``, report ``i`` of ``islands``) uses
``numpy.random.SeedSequence([seed, i])``, so any unit can be rerun alone.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (
    RESAMPLE,
    DirectSampler,
    GridSpec,
    MixtureGenConfig,
    empirical_grid_pdf,
    generate_random_mixture,
    run_trial,
    two_island_experiment,
)
from .mixture import load_mixture, standard_normal, two_island_mixture
from .nuts import NUTS, SamplerConfig
from .schemas import BENCH_SCHEMA_ID, ISLANDS_SCHEMA_ID, SAMPLES_SCHEMA_ID
from .spread import SpreadConfig, SpreadNUTS

logger = logging.getLogger("spreadnuts")

OUTPUT_DIR_ENV = "SPREADNUTS_OUTPUT_DIR"
SAMPLER_NAMES = ("nuts", "spreadnuts", "direct")


class ConfigError(Exception):
    """Bad flags or inputs; maps to exit code 2."""


def unit_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def parse_range(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+))?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected N or LO..HI, got {text!r}")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) is not None else lo
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"empty or non-positive range {text!r}")
    return lo, hi


def parse_samplers(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SAMPLER_NAMES]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"samplers must be a non-empty subset of {','.join(SAMPLER_NAMES)}")
    return list(dict.fromkeys(names))


def resolve_target(spec: str):
    """Named target (``std-normal-<d>d``, ``islands-<mu>``) or a mixture JSON file path."""
    m = re.fullmatch(r"std-normal-(\d)d", spec)
    if m:
        return standard_normal(int(m.group(1)))
    m = re.fullmatch(r"islands-(\d+(?:\.\d+)?)", spec)
    if m:
        return two_island_mixture(float(m.group(1)))
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"unknown target {spec!r}: not a built-in name and not a readable file")
    try:
        return load_mixture(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load target {spec!r}: {exc}") from exc


def sampler_config(cfg: dict) -> SamplerConfig:
    return SamplerConfig(
        step_size=cfg["step_size"],
        max_depth=cfg["max_depth"],
        adapt_iterations=cfg["burn_in"] if cfg["adapt"] is None else cfg["adapt"],
        target_accept=cfg["target_accept"],
        seed=cfg["seed"],
    )


def make_samplers(names, cfg: dict):
    out = []
    for name in names:
        if name == "nuts":
            out.append(NUTS(sampler_config(cfg)))
        elif name == "spreadnuts":
            out.append(
                SpreadNUTS(
                    SpreadConfig(
                        sampler_config(cfg),
                        max_total_points=cfg["max_points"],
                        selection_bias_enabled=not cfg["no_bias"],
                    )
                )
            )
        else:
            out.append(DirectSampler())
    return out


def _common_config(args) -> dict:
    cfg = {
        "seed": args.seed,
        "n_samples": args.n,
        "burn_in": args.burn,
        "step_size": args.step_size,
        "max_depth": args.max_depth,
        "adapt": args.adapt,
        "target_accept": args.target_accept,
        "max_points": args.max_points,
        "no_bias": args.no_bias,
        "grid": {"cell_width": args.cell_width, "lower": -args.bound, "upper": args.bound},
        "version": __version__,
    }
    if args.n <= args.burn or args.burn < 0:
        raise ConfigError("--n must exceed --burn, and --burn must be non-negative")
    if args.step_size is not None and not args.step_size > 0:
        raise ConfigError("--step-size must be positive")
    if args.max_depth < 1 or args.max_points < 1:
        raise ConfigError("--max-depth and --max-points must be at least 1")
    if not 0 < args.target_accept < 1:
        raise ConfigError("--target-accept must lie in (0, 1)")
    if not (args.cell_width > 0 and args.bound > 0):
        raise ConfigError("--cell-width and --bound must be positive")
    return cfg


def _grid(cfg, dimension) -> GridSpec:
    g = cfg["grid"]
    return GridSpec(dimension, g["cell_width"], g["lower"], g["upper"])


def output_path(args, default_name: str) -> Path | None:
    if args.out == "-":
        return None
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _config_comment(cfg) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True) + "\n"


# -- sample -------------------------------------------------------------------


def cmd_sample(args) -> int:
    cfg = _common_config(args)
    cfg.update({"command": "sample", "sampler": args.sampler, "target": args.target, "format": args.format})
    target = resolve_target(args.target)
    cfg["dimension"] = target.dimension
    sampler = make_samplers([args.sampler], cfg)[0]
    rng = unit_rng(args.seed, 0)
    start_rng, run_rng = rng.spawn(2)
    start = target.sample(1, start_rng)[0]
    res = sampler.run(target, start, args.n, run_rng)
    kept = res.samples[args.burn :]
    diagnostics = {
        "n_retained": int(kept.shape[0]),
        "step_size": None if not math.isfinite(res.step_size) else res.step_size,
        "mean_leapfrog": float(np.mean(res.n_leapfrog)),
        "mean_accept": float(np.mean(res.accept_stats)),
        "n_divergent": int(res.n_divergent),
    }
    if args.format == "json":
        doc = {"schema": SAMPLES_SCHEMA_ID, "config": cfg, "samples": kept.tolist(), "diagnostics": diagnostics}
        text = _dump_json(doc)
    else:
        buf = io.StringIO()
        buf.write(_config_comment(cfg))
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(target.dimension)])
        writer.writerows([repr(float(v)) for v in row] for row in kept)
        text = buf.getvalue()
    _write(output_path(args, f"sample-{args.sampler}-seed{args.seed}.{args.format}"), text)
    if args.histogram:
        empirical_grid_pdf(kept, _grid(cfg, target.dimension)).write_csv(args.histogram)
    return 0


# -- bench --------------------------------------------------------------------


def _bench_unit(task):
    cfg, index, dimension = task["cfg"], task["index"], task["dimension"]
    rng = unit_rng(cfg["seed"], index)
    mix_rng, run_rng = rng.spawn(2)
    gen = MixtureGenConfig(
        num_components_range=tuple(cfg["components"]),
        dimension_range=(dimension, dimension),
        mean_bound=cfg["mean_bound"],
        cov_scale_bound=cfg["cov_scale_bound"],
        seed=cfg["seed"],
    )
    mixture = generate_random_mixture(gen, mix_rng)
    samplers = make_samplers(cfg["samplers"], cfg)
    report = run_trial(
        mixture, samplers, cfg["n_samples"], cfg["burn_in"], _grid(cfg, dimension), run_rng, seed=[cfg["seed"], index]
    )
    doc = {"trial_index": index, "dimension": dimension, "n_components": len(mixture.components)}
    doc.update(report.to_dict(include_timings=task["timings"]))
    return doc


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def bench_summary(trials, names) -> list[dict]:
    rows = []
    for d in sorted({t["dimension"] for t in trials}):
        group = [t for t in trials if t["dimension"] == d]
        m_tv = {RESAMPLE: _mean(t["baseline_m_tv"] for t in group)}
        for name in names:
            m_tv[name] = _mean(next(s["m_tv"] for s in t["samplers"] if s["name"] == name) for t in group)
        keys = list(group[0]["log_ratios"])
        ratios = {k: _mean(t["log_ratios"][k] for t in group) for k in keys}
        rows.append({"dimension": d, "n_trials": len(group), "mean_m_tv": m_tv, "mean_log_ratio": ratios})
    return rows


def _run_units(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _trial_rows(docs, names, extra_cols):
    header = list(extra_cols) + [f"m_tv_{n}" for n in names] + [f"m_tv_{RESAMPLE}"]
    ratio_keys = list(docs[0]["log_ratios"]) if docs else []
    header += [f"log_ratio_{k.replace('/', '_over_')}" for k in ratio_keys]
    rows = []
    for doc in docs:
        by_name = {s["name"]: s for s in doc["samplers"]}
        row = [doc[c] for c in extra_cols]
        row += [by_name[n]["m_tv"] for n in names] + [doc["baseline_m_tv"]]
        row += [doc["log_ratios"][k] for k in ratio_keys]
        rows.append(["" if v is None else v for v in row])
    return header, rows


def _csv_text(cfg, header, rows) -> str:
    buf = io.StringIO()
    buf.write(_config_comment(cfg))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_bench(args) -> int:
    cfg = _common_config(args)
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    if args.dims[1] > 5:
        raise ConfigError("dimensions above 5 are not supported")
    samplers = [s for s in args.samplers if s != "direct"] or args.samplers
    cfg.update(
        {
            "command": "bench",
            "trials": args.trials,
            "dims": list(args.dims),
            "components": list(args.components),
            "mean_bound": args.mean_bound,
            "cov_scale_bound": args.cov_scale,
            "samplers": samplers,
            "format": args.format,
        }
    )
    tasks = []
    for dimension in range(args.dims[0], args.dims[1] + 1):
        for _ in range(args.trials):
            tasks.append({"cfg": cfg, "index": len(tasks), "dimension": dimension, "timings": args.timings})
    trials = _run_units(_bench_unit, tasks, args.workers)
    failed = any(s["failed"] for t in trials for s in t["samplers"])
    if args.format == "json":
        doc = {
            "schema": BENCH_SCHEMA_ID,
            "config": cfg,
            "trials": trials,
            "summary": bench_summary(trials, samplers),
            "failed": failed,
        }
        text = _dump_json(doc)
    else:
        header, rows = _trial_rows(trials, samplers, ["trial_index", "dimension", "n_components"])
        text = _csv_text(cfg, header, rows)
    _write(output_path(args, f"bench-seed{args.seed}.{args.format}"), text)
    return 1 if failed else 0


# -- islands ------------------------------------------------------------------


def _islands_unit(task):
    cfg, index, mu, rep = task["cfg"], task["index"], task["mu"], task["repetition"]
    report = two_island_experiment(
        mu,
        make_samplers(cfg["samplers"], cfg),
        cfg["n_samples"],
        cfg["burn_in"],
        rng=unit_rng(cfg["seed"], index),
        grid=_grid(cfg, 2),
        seed=[cfg["seed"], index],
    )
    doc = {"mu_magnitude": mu, "repetition": rep}
    doc.update(report.to_dict(include_timings=task["timings"]))
    return doc


def cmd_islands(args) -> int:
    cfg = _common_config(args)
    mus = args.mu or [2.5, 5.0]
    if any(not m > 0 for m in mus):
        raise ConfigError("--mu values must be positive")
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    cfg.update({"command": "islands", "mu": mus, "trials": args.trials, "samplers": args.samplers, "format": args.format})
    tasks = []
    for mu in mus:
        for rep in range(args.trials):
            tasks.append({"cfg": cfg, "index": len(tasks), "mu": mu, "repetition": rep, "timings": args.timings})
    reports = _run_units(_islands_unit, tasks, args.workers)
    failed = any(s["failed"] for r in reports for s in r["samplers"])
    if args.format == "json":
        text = _dump_json({"schema": ISLANDS_SCHEMA_ID, "config": cfg, "reports": reports, "failed": failed})
    else:
        header, rows = _trial_rows(reports, args.samplers, ["mu_magnitude", "repetition"])
        header += [f"occupancy_{n}_{side}" for n in args.samplers for side in ("plus", "minus")]
        for row, r in zip(rows, reports):
            by_name = {s["name"]: s for s in r["samplers"]}
            for n in args.samplers:
                row.extend(by_name[n].get("occupancy") or ["", ""])
        text = _csv_text(cfg, header, rows)
    _write(output_path(args, f"islands-seed{args.seed}.{args.format}"), text)
    return 1 if failed else 0


# -- parser -------------------------------------------------------------------


def _add_common(p, *, n_default=10000, burn_default=500):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--n", type=int, default=n_default, help="draws per chain, burn-in included")
    p.add_argument("--burn", type=int, default=burn_default, help="leading draws discarded")
    p.add_argument("--out", default=None, help=f"output file, '-' for stdout (default: ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--step-size", type=float, default=None, help="initial step size (default: heuristic search)")
    p.add_argument("--max-depth", type=int, default=10, help="NUTS doubling cap; also caps SpreadNUTS iterations")
    p.add_argument("--max-points", type=int, default=1024, help="SpreadNUTS leapfrog budget per draw")
    p.add_argument("--adapt", type=int, default=None, help="step-size adaptation iterations (default: --burn)")
    p.add_argument("--target-accept", type=float, default=0.8)
    p.add_argument("--no-bias", action="store_true", help="SpreadNUTS picks uniformly among candidates")
    p.add_argument("--cell-width", type=float, default=0.1, help="histogram cell width")
    p.add_argument("--bound", type=float, default=20.0, help="histogram covers [-bound, bound] per axis")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spreadnuts", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run one sampler on one target and write the retained draws")
    _add_common(p)
    p.add_argument("--sampler", choices=SAMPLER_NAMES, default="nuts")
    p.add_argument("--target", default="std-normal-1d", help="std-normal-<d>d, islands-<mu>, or a mixture JSON file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--histogram", default=None, help="also write the grid histogram as CSV here")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", help="random-mixture benchmark: NUTS vs SpreadNUTS vs direct resampling")
    _add_common(p)
    p.add_argument("--trials", type=int, default=1, help="mixtures per dimension")
    p.add_argument("--dims", type=parse_range, default=(1, 3), help="dimension range, e.g. 1..3")
    p.add_argument("--components", type=parse_range, default=(1, 4), help="component-count range, e.g. 1..4")
    p.add_argument("--mean-bound", type=float, default=20.0)
    p.add_argument("--cov-scale", type=float, default=4.0, help="covariance scale drawn from U[0, this]")
    p.add_argument("--samplers", type=parse_samplers, default=["nuts", "spreadnuts"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timings", action="store_true", help="include wall-clock durations (breaks byte-identity)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("islands", help="two-island experiment N(mu, I) + N(-mu, I)")
    _add_common(p)
    p.add_argument("--mu", type=float, action="append", help="per-coordinate mode offset; repeatable")
    p.add_argument("--trials", type=int, default=1, help="repetitions per mu")
    p.add_argument("--samplers", type=parse_samplers, default=["nuts", "spreadnuts", "direct"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timings", action="store_true", help="include wall-clock durations (breaks byte-identity)")
    p.set_defaults(func=cmd_islands)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("spreadnuts: error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"spreadnuts: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"spreadnuts: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
