"""Command-line front end.

Subcommands: ``run`` (drive a session over a dataset and export its
artifacts), ``compare`` (align the running error of completed runs),
``reconstruct`` (dump originals, reconstructions, and dictionary atoms as
PGM files from a checkpoint), and ``cache-patches`` (preprocess a dataset
into a binary patch cache).

Configuration comes from a flat key=value file and/or flags; flags override
the file, and the ASCA_SEED environment variable overrides the seed from
either source. Exit codes: 0 success, 1 usage, 2 data error, 3 numeric
failure.
"""

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    DataFormatError,
    PATCH_LEN,
    build_patch_stream,
    load_cifar10_batch,
    load_patch_cache,
    load_pgm,
    load_pgm_dir,
    write_patch_cache,
    write_pgm,
)
from .linalg import matvec
from .pipeline import (
    CHECKPOINT_VERSION,
    CheckpointError,
    PipelineError,
    Session,
    SessionConfig,
    checkpoint_load,
    checkpoint_save,
    run_stream,
    write_series_csv,
)
from .solver import SolveOpts, SolverDivergenceError, fista_solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATASET_KINDS = ("pgm-dir", "cifar10", "patch-cache")

AUTOMATON_CSV_HEADER = "state,lb,ub,memory,best_err,action"


class UsageError(ValueError):
    """Bad flags or config keys."""


class DataError(RuntimeError):
    """Dataset or run-artifact level failure."""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {raw!r}")


def _parse_actions(raw: str) -> tuple:
    try:
        actions = tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"bad action list {raw!r}: {exc}") from None
    return actions


# key -> parser; every key is valid both in the config file and as --key
_CONFIG_PARSERS = {
    "dataset": str,
    "kind": str,
    "output": str,
    "lambda": float,
    "gamma": float,
    "max_iters": int,
    "rel_tol": float,
    "initial_dim": int,
    "actions": _parse_actions,
    "threshold": float,
    "sigma": float,
    "controller_period": int,
    "alternations_max": int,
    "outer_rel_tol": float,
    "seed": int,
    "dynamic": _parse_bool,
    "baseline": _parse_bool,
    "baseline_dim": int,
}

_DEFAULTS = {
    "dataset": None,
    "kind": None,
    "output": "run",
    "lambda": 0.1,
    "gamma": 0.0,
    "max_iters": 500,
    "rel_tol": 1e-6,
    "initial_dim": 50,
    "actions": (5, 15, 20, 30, 35),
    "threshold": 0.5,
    "sigma": 0.5,
    "controller_period": 4,
    "alternations_max": 10,
    "outer_rel_tol": 1e-4,
    "seed": 0,
    "dynamic": False,
    "baseline": False,
    "baseline_dim": 50,
}


@dataclass
class RunSpec:
    """Fully resolved run description."""

    config: SessionConfig
    dataset: Path
    kind: str
    output: Path
    baseline: bool
    baseline_dim: int


def _read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](raw.strip())
        except UsageError:
            raise
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def parse_config(config_path=None, overrides=None, env=None) -> RunSpec:
    """Merge defaults, a config file, and flag overrides into a RunSpec.

    Precedence: defaults < file < flags < ASCA_SEED (seed only).
    """
    env = os.environ if env is None else env
    values = dict(_DEFAULTS)
    if config_path is not None:
        values.update(_read_config_file(config_path))
    for key, val in (overrides or {}).items():
        if key not in _CONFIG_PARSERS:
            raise UsageError(f"unknown config key {key!r}")
        if val is not None:
            values[key] = val
    if "ASCA_SEED" in env:
        try:
            values["seed"] = int(env["ASCA_SEED"])
        except ValueError as exc:
            raise UsageError(f"bad ASCA_SEED: {exc}") from None
    if values["dataset"] is None:
        raise UsageError("dataset is required (set dataset= in the config or pass --dataset)")
    if values["kind"] is None:
        raise UsageError(f"kind is required; one of {', '.join(DATASET_KINDS)}")
    if values["kind"] not in DATASET_KINDS:
        raise UsageError(f"kind must be one of {', '.join(DATASET_KINDS)}, got {values['kind']!r}")
    actions = values["actions"]
    if not actions or any(b <= a for a, b in zip(actions, actions[1:])):
        raise UsageError(f"actions must be a strictly increasing list, got {actions}")
    if not 0.0 < values["sigma"] < 1.0:
        raise UsageError(f"sigma must lie in (0, 1), got {values['sigma']}")
    if values["threshold"] <= 0.0:
        raise UsageError(f"threshold must be positive, got {values['threshold']}")
    if values["baseline_dim"] < 1:
        raise UsageError("baseline_dim must be >= 1")
    try:
        opts = SolveOpts(
            lam=values["lambda"],
            gamma=values["gamma"],
            max_iters=values["max_iters"],
            rel_tol=values["rel_tol"],
        )
        config = SessionConfig(
            solve_opts=opts,
            initial_dim=values["initial_dim"],
            actions=actions,
            threshold=values["threshold"],
            sigma=values["sigma"],
            controller_period=values["controller_period"],
            alternations_max=values["alternations_max"],
            outer_rel_tol=values["outer_rel_tol"],
            seed=values["seed"],
            dynamic_mode=values["dynamic"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunSpec(
        config=config,
        dataset=Path(values["dataset"]),
        kind=values["kind"],
        output=Path(values["output"]),
        baseline=values["baseline"],
        baseline_dim=values["baseline_dim"],
    )


def _spec_values(spec: RunSpec) -> dict:
    cfg = spec.config
    return {
        "dataset": str(spec.dataset),
        "kind": spec.kind,
        "output": str(spec.output),
        "lambda": cfg.solve_opts.lam,
        "gamma": cfg.solve_opts.gamma,
        "max_iters": cfg.solve_opts.max_iters,
        "rel_tol": cfg.solve_opts.rel_tol,
        "initial_dim": cfg.initial_dim,
        "actions": ",".join(str(a) for a in cfg.actions),
        "threshold": cfg.threshold,
        "sigma": cfg.sigma,
        "controller_period": cfg.controller_period,
        "alternations_max": cfg.alternations_max,
        "outer_rel_tol": cfg.outer_rel_tol,
        "seed": cfg.seed,
        "dynamic": "true" if cfg.dynamic_mode else "false",
        "baseline": "true" if spec.baseline else "false",
        "baseline_dim": spec.baseline_dim,
    }


def write_manifest(spec: RunSpec, path) -> None:
    """Resolved config as a reusable key=value file; info lines are comments."""
    lines = [
        "# asca run manifest; reusable via `asca run --config <this file>`",
        f"# package_version={__version__}",
        f"# checkpoint_format_version={CHECKPOINT_VERSION}",
        "# series_schema=k,sq_error,tmse,dim,state,action,growth",
    ]
    for key, val in _spec_values(spec).items():
        lines.append(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")
    Path(path).write_text("\n".join(lines) + "\n")


def _load_patches(spec: RunSpec) -> list:
    if spec.kind == "pgm-dir":
        return build_patch_stream(load_pgm_dir(spec.dataset)).patches
    if spec.kind == "cifar10":
        return build_patch_stream(load_cifar10_batch(spec.dataset)).patches
    return load_patch_cache(spec.dataset).patches


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_automaton_csv(automaton, path) -> None:
    lines = [AUTOMATON_CSV_HEADER]
    for i, st in enumerate(automaton.states):
        lines.append(
            f"{i},{_fmt_float(st.lb)},{_fmt_float(st.ub)},"
            f"{_fmt_float(st.memory)},{_fmt_float(st.best_err)},{st.action_ell}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_run(spec: RunSpec) -> int:
    """Drive one session over the dataset and export its artifacts."""
    patches = _load_patches(spec)
    input_dim = patches[0].shape[0] if patches else PATCH_LEN
    config = spec.config
    if spec.baseline:
        config = replace(config, initial_dim=spec.baseline_dim)
    session = Session(config, input_dim, controller_enabled=not spec.baseline)
    run_stream(session, patches)
    spec.output.mkdir(parents=True, exist_ok=True)
    write_series_csv(session.ledger, spec.output / "series.csv")
    if session.automaton is not None:
        write_automaton_csv(session.automaton, spec.output / "automaton.csv")
    write_manifest(spec, spec.output / "manifest.txt")
    checkpoint_save(session, spec.output / "final.ckpt")
    n_growth = len(session.growth_records)
    final_tmse = session.ledger.tmse() if session.ledger.series else float("nan")
    print(
        f"run complete: {len(patches)} samples, final dim {session.dictionary.n}, "
        f"final tmse {final_tmse:.6g}, {n_growth} growth events -> {spec.output}"
    )
    return EXIT_OK


def _read_series(path) -> list:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "k,sq_error,tmse,dim,state,action,growth":
        raise DataError(f"{path}: not a series.csv (bad header)")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            {
                "k": int(parts[0]),
                "sq_error": float(parts[1]),
                "tmse": float(parts[2]),
                "dim": int(parts[3]),
                "state": None if parts[4] == "" else int(parts[4]),
                "action": None if parts[5] == "" else int(parts[5]),
                "growth": None if parts[6] == "" else int(parts[6]),
            }
        )
    return rows


def cmd_compare(run_dirs, output) -> int:
    """Align tmse-vs-k across completed runs and summarize each."""
    if len(run_dirs) < 2:
        raise UsageError("compare needs at least two run directories")
    names = []
    for d in run_dirs:
        base = Path(d).name or str(d)
        name = base
        suffix = 2
        while name in names:
            name = f"{base}_{suffix}"
            suffix += 1
        names.append(name)
    series = [_read_series(Path(d) / "series.csv") for d in run_dirs]
    counts = [len(s) for s in series]
    if len(set(counts)) != 1:
        raise DataError(f"sample counts differ across runs: {counts}")
    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)
    lines = ["k," + ",".join(f"tmse_{n}" for n in names)]
    for i in range(counts[0]):
        row = [str(series[0][i]["k"])]
        row += [repr(s[i]["tmse"]) for s in series]
        lines.append(",".join(row))
    (output / "compare.csv").write_text("\n".join(lines) + "\n")
    summary = ["run,final_tmse,final_dim,growth_events"]
    for name, s in zip(names, series):
        growths = sum(1 for r in s if r["growth"] is not None)
        summary.append(f"{name},{s[-1]['tmse']!r},{s[-1]['dim']},{growths}")
    (output / "summary.csv").write_text("\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return EXIT_OK


def _to_pgm_quantized(vec: np.ndarray, side: int):
    img = vec.reshape(side, side)
    lo = float(img.min())
    hi = float(img.max())
    if hi > lo:
        q = np.round(255.0 * (img - lo) / (hi - lo)).astype(np.uint8)
    else:
        q = np.zeros_like(img, dtype=np.uint8)
    return q, lo, hi


def cmd_reconstruct(checkpoint, cache, indices, output) -> int:
    """Export selected patches, their re-encodings, and all atoms as PGM."""
    session = checkpoint_load(checkpoint)
    stream = load_patch_cache(cache)
    side = math.isqrt(session.input_dim)
    if side * side != session.input_dim:
        raise DataError(f"input dim {session.input_dim} is not a square; cannot render")
    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)
    mapping = []

    def dump(name: str, vec: np.ndarray):
        q, lo, hi = _to_pgm_quantized(vec, side)
        write_pgm(output / name, q)
        mapping.append(f"{name} {lo!r} {hi!r}")

    b_mat = session.dictionary.B
    opts = session.config.solve_opts
    for idx in indices:
        if not 0 <= idx < len(stream.patches):
            raise DataError(f"patch index {idx} out of range 0..{len(stream.patches) - 1}")
        y = stream.patches[idx]
        if y.shape[0] != session.input_dim:
            raise DataError(
                f"cache patch length {y.shape[0]} != checkpoint input dim {session.input_dim}"
            )
        code = fista_solve(b_mat, y, np.zeros(session.dictionary.n), opts)
        dump(f"orig_{idx:04d}.pgm", y)
        dump(f"recon_{idx:04d}.pgm", matvec(b_mat, code.coeffs))
    for j in range(session.dictionary.n):
        dump(f"atom_{j:04d}.pgm", b_mat[:, j].copy())
    (output / "mapping.txt").write_text("\n".join(mapping) + "\n")
    print(f"wrote {len(indices)} patch pairs and {session.dictionary.n} atoms -> {output}")
    return EXIT_OK


def cmd_cache_patches(dataset, kind, output) -> int:
    """Preprocess a dataset into the binary patch cache format."""
    if kind == "pgm-dir":
        images = load_pgm_dir(dataset)
    elif kind == "cifar10":
        images = load_cifar10_batch(dataset)
    else:
        raise UsageError(f"cache-patches supports pgm-dir or cifar10, got {kind!r}")
    stream = build_patch_stream(images)
    write_patch_cache(output, stream.patches)
    print(f"cached {len(stream.patches)} patches from {len(images)} images -> {output}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--dataset", help="dataset path")
    p.add_argument("--kind", choices=DATASET_KINDS, help="dataset kind")
    p.add_argument("--output", help="run output directory (default: run)")
    p.add_argument("--lambda", dest="lambda_", type=float, help="sparsity weight")
    p.add_argument("--gamma", type=float, help="temporal-consistency weight")
    p.add_argument("--max-iters", type=int, help="solver iteration cap per encode")
    p.add_argument("--rel-tol", type=float, help="solver relative energy tolerance")
    p.add_argument("--initial-dim", type=int, help="starting dictionary size")
    p.add_argument("--actions", type=_parse_actions, help="growth amounts, e.g. 5,15,20,30,35")
    p.add_argument("--threshold", type=float, help="running-error threshold")
    p.add_argument("--sigma", type=float, help="penalty rate in (0, 1)")
    p.add_argument("--controller-period", type=int, help="samples between controller checks")
    p.add_argument("--alternations-max", type=int, help="encode/update alternations per sample")
    p.add_argument("--outer-rel-tol", type=float, help="alternation stopping tolerance")
    p.add_argument("--seed", type=int, help="run seed (ASCA_SEED env overrides)")
    p.add_argument("--dynamic", action="store_const", const=True, help="temporal solver mode")
    p.add_argument("--baseline", action="store_const", const=True,
                   help="fixed-dimension run without the controller")
    p.add_argument("--baseline-dim", type=int, help="dictionary size for --baseline")


def _overrides_from_args(args) -> dict:
    mapping = {
        "dataset": args.dataset,
        "kind": args.kind,
        "output": args.output,
        "lambda": args.lambda_,
        "gamma": args.gamma,
        "max_iters": args.max_iters,
        "rel_tol": args.rel_tol,
        "initial_dim": args.initial_dim,
        "actions": args.actions,
        "threshold": args.threshold,
        "sigma": args.sigma,
        "controller_period": args.controller_period,
        "alternations_max": args.alternations_max,
        "outer_rel_tol": args.outer_rel_tol,
        "seed": args.seed,
        "dynamic": args.dynamic,
        "baseline": args.baseline,
        "baseline_dim": args.baseline_dim,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def _build_parser() -> _Parser:
    parser = _Parser(prog="asca", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a session over a dataset")
    _add_config_flags(p_run)

    p_cmp = sub.add_parser("compare", help="align tmse across completed runs")
    p_cmp.add_argument("run_dirs", nargs="+", help="completed run directories")
    p_cmp.add_argument("--output", default=".", help="where to write compare.csv")

    p_rec = sub.add_parser("reconstruct", help="export patches, reconstructions, atoms")
    p_rec.add_argument("checkpoint", help="final.ckpt from a run")
    p_rec.add_argument("cache", help="patch cache file")
    p_rec.add_argument("indices", nargs="+", type=int, help="patch indices to export")
    p_rec.add_argument("--output", default="reconstruction", help="output directory")

    p_cache = sub.add_parser("cache-patches", help="preprocess a dataset into a patch cache")
    p_cache.add_argument("--dataset", required=True)
    p_cache.add_argument("--kind", required=True, choices=("pgm-dir", "cifar10"))
    p_cache.add_argument("--output", required=True, help="cache file to write")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            spec = parse_config(args.config, _overrides_from_args(args))
            return cmd_run(spec)
        if args.command == "compare":
            return cmd_compare(args.run_dirs, args.output)
        if args.command == "reconstruct":
            return cmd_reconstruct(args.checkpoint, args.cache, args.indices, args.output)
        return cmd_cache_patches(args.dataset, args.kind, args.output)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DataError, CheckpointError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as exc:
        if isinstance(exc.__cause__, SolverDivergenceError):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverDivergenceError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
