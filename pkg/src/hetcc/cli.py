"""Command-line entry point: gen, train, run, ablate and report.

Exit codes: 0 success, 2 configuration or usage error, 3 missing artifact,
4 runtime failure. The worker count for ``run``/``ablate`` comes from
``--workers`` or the ``HETCC_WORKERS`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from .agent import init_params, load_params, save_params
from .bench import (
    InstanceConfig, InstanceConfigError, InstanceFormatError, appendix_b_configs, build_instance,
    load_instance, save_instance,
)
from .decomp import DecompositionBudgetError
from .estimator import decompose
from .optim import DEFAULT_POOL, OptimizerPool, PoolConfigError
from .runner import (
    EpisodeConfig, EpisodeConfigError, NamedProblem, TrainConfig, ablate, parse_mode, read_results,
    summarize, train, write_convergence, write_results, write_summary, write_trace,
)

log = logging.getLogger("hetcc")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 2, 3, 4
MANIFEST_VERSION = 1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _ints(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# -- manifest -------------------------------------------------------------------

def load_manifest(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"manifest {p} not found", EXIT_MISSING)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise CliError(f"manifest {p}: {err}", EXIT_CONFIG) from None
    if int(doc.get("version", 1)) > MANIFEST_VERSION:
        raise CliError(f"manifest version {doc['version']} is newer than supported", EXIT_CONFIG)
    base = p.parent
    for key in ("instances",):
        if key in doc:
            doc[key] = [str((base / q) if not Path(q).is_absolute() else q) for q in doc[key]]
    for key in ("checkpoint", "out"):
        if doc.get(key) and not Path(doc[key]).is_absolute():
            doc[key] = str(base / doc[key])
    return doc


def _setting(args, manifest: dict, name: str, section: Optional[str] = None, default=None):
    """Flag value if given, else the manifest value, else the default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    src = manifest.get(section, {}) if section else manifest
    return src.get(name, default)


def _episode_config(args, manifest) -> EpisodeConfig:
    ep = manifest.get("episode", {})
    cfg = EpisodeConfig(
        max_fes=int(_setting(args, manifest, "max_fes", "episode", 100_000)),
        step_fes=int(_setting(args, manifest, "step_fes", "episode", 2500)),
        target_cost=float(ep.get("target_cost", 1e-20)),
        gamma=float(ep.get("gamma", 0.99)),
        init_pop_size=int(ep.get("init_pop_size", 100)),
        probe_samples=int(ep.get("probe_samples", 3)),
    )
    if cfg.max_fes <= 0 or cfg.step_fes <= 0:
        raise CliError("budgets must be positive", EXIT_CONFIG)
    try:
        cfg.validate()
    except EpisodeConfigError as err:
        raise CliError(str(err), EXIT_CONFIG) from None
    return cfg


def _pool(args, manifest) -> OptimizerPool:
    spec = _setting(args, manifest, "pool", None, ",".join(DEFAULT_POOL))
    try:
        return OptimizerPool.parse(spec) if isinstance(spec, str) else OptimizerPool(list(spec))
    except PoolConfigError as err:
        raise CliError(str(err), EXIT_CONFIG) from None


def _problems(args, manifest) -> List[NamedProblem]:
    paths = args.instances or manifest.get("instances") or []
    if not paths:
        raise CliError("no instance documents given", EXIT_CONFIG)
    method = _setting(args, manifest, "decomposition", None, "ground-truth")
    out = []
    for p in paths:
        if not Path(p).exists():
            raise CliError(f"instance document {p} not found", EXIT_MISSING)
        try:
            inst = load_instance(p)
        except InstanceFormatError as err:
            raise CliError(f"{p}: {err}", EXIT_CONFIG) from None
        try:
            dec = decompose(inst, method)
        except ValueError as err:
            raise CliError(str(err), EXIT_CONFIG) from None
        out.append(NamedProblem(inst.config.name or Path(p).stem, inst, dec))
    return out


def _seeds(args, manifest) -> List[int]:
    seeds = args.seeds if getattr(args, "seeds", None) is not None else manifest.get("seeds")
    if seeds is None:
        seeds = [args.seed if args.seed is not None else 0]
    if len(set(seeds)) != len(seeds):
        raise CliError("seeds must be distinct", EXIT_CONFIG)
    return [int(s) for s in seeds]


def _out_dir(args, manifest) -> Path:
    out = Path(_setting(args, manifest, "out", None, "hetcc-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _checkpoint(args, manifest, pool, required: bool):
    path = _setting(args, manifest, "checkpoint", None)
    if path is None:
        if required:
            raise CliError("this mode needs --checkpoint", EXIT_MISSING)
        return None
    if not Path(path).exists():
        raise CliError(f"checkpoint {path} not found", EXIT_MISSING)
    return load_params(path, pool.size)


def _sidecar(out: Path, command: str, started: float) -> None:
    info = {"command": command, "started": started, "finished": time.time()}
    (out / f"{command}.timestamps.json").write_text(json.dumps(info, indent=2) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_gen(args) -> int:
    manifest = load_manifest(args.config)
    scale = args.scale if args.scale is not None else int(manifest.get("scale", 1))
    seed = args.seed if args.seed is not None else int(manifest.get("seed", 0))
    preset = args.preset or manifest.get("preset")
    flags_given = any(v is not None for v in (args.dims, args.functions, args.degree))
    if preset and flags_given:
        raise CliError("--preset cannot be combined with --dims/--functions/--degree", EXIT_CONFIG)
    out = _out_dir(args, manifest)
    if preset:
        if preset != "appendix-b":
            raise CliError(f"unknown preset {preset!r}", EXIT_CONFIG)
        configs = appendix_b_configs(seed=seed, scale=scale)
    else:
        dims = args.dims or manifest.get("dims")
        fns = args.functions or manifest.get("functions")
        if not dims or not fns:
            raise CliError("give --preset or both --dims and --functions", EXIT_CONFIG)
        degree = args.degree if args.degree is not None else int(manifest.get("degree", 1))
        if scale > 1:
            dims = [max(1, d // scale) for d in dims]
        name = args.name or manifest.get("name") or "instance"
        configs = {name: InstanceConfig(dims, fns, degree, seed=seed, name=name)}
    for name, cfg in configs.items():
        path = save_instance(build_instance(cfg), out / f"{name}.json")
        print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.time()
    manifest = load_manifest(args.manifest)
    pool = _pool(args, manifest)
    problems = _problems(args, manifest)
    ep = _episode_config(args, manifest)
    tr = dict(manifest.get("train", {}))
    for key in ("epochs", "learning_rate", "num_envs"):
        if getattr(args, key, None) is not None:
            tr[key] = getattr(args, key)
    try:
        tc = TrainConfig(**tr)
        tc.validate()
    except (TypeError, ValueError) as err:
        raise CliError(f"train config: {err}", EXIT_CONFIG) from None
    seed = args.seed if args.seed is not None else int(manifest.get("seed", 0))
    rng = np.random.default_rng(seed)
    start = _checkpoint(args, manifest, pool, required=False)
    params = start if start is not None else init_params(pool.size, rng)
    out = _out_dir(args, manifest)
    params, history = train([(p.instance, p.decomposition) for p in problems], pool, ep, tc, params, rng)
    save_params(params, out / "agent.hcag")
    (out / "train_log.json").write_text(json.dumps(history, indent=1, sort_keys=True) + "\n")
    _sidecar(out, "train", started)
    print(out / "agent.hcag")
    return EXIT_OK


def _run_modes(args, manifest, modes: List[str], command: str) -> int:
    started = time.time()
    pool = _pool(args, manifest)
    try:
        modes = [parse_mode(m, pool) for m in modes]
    except EpisodeConfigError as err:
        raise CliError(str(err), EXIT_CONFIG) from None
    needs_params = any(m in ("learned", "greedy") for m in modes)
    params = _checkpoint(args, manifest, pool, required=needs_params)
    problems = _problems(args, manifest)
    ep = _episode_config(args, manifest)
    seeds = _seeds(args, manifest)
    out = _out_dir(args, manifest)
    records = ablate(problems, pool, ep, params, modes, seeds, workers=args.workers)
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    for r in records:
        stem = f"{r['instance']}__{r['mode'].replace(':', '')}__s{r['seed']}"
        write_trace(r["trace"], traces / f"{stem}.csv")
        write_convergence(r["history"], traces / f"{stem}.curve.csv")
        if not r["ledger_ok"]:
            raise CliError(f"FE ledger mismatch in {stem}: {r['ledger']}", EXIT_RUNTIME)
    write_results(records, out / "results.csv")
    reference = modes[0]
    write_summary(summarize(records, reference=reference), out / f"{command}_table.csv")
    _sidecar(out, command, started)
    print(out / "results.csv")
    return EXIT_OK


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    mode = args.mode or manifest.get("mode", "learned")
    return _run_modes(args, manifest, [mode], "run")


def cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    pool = _pool(args, manifest)
    modes = args.modes or manifest.get("modes") or (
        ["learned", "random"] + [f"fixed:{l}" for l in range(1, pool.size + 1)]
    )
    return _run_modes(args, manifest, list(modes), "ablate")


def cmd_report(args) -> int:
    started = time.time()
    records = []
    tables = [Path(t) for t in args.tables]
    for t in tables:
        if not t.exists():
            raise CliError(f"result table {t} not found", EXIT_MISSING)
    label = len(tables) > 1
    for i, t in enumerate(tables):
        try:
            rows = read_results(t)
        except (ValueError, KeyError) as err:
            raise CliError(f"{t}: {err}", EXIT_CONFIG) from None
        for r in rows:
            if label:
                r["mode"] = f"{i + 1}:{r['mode']}"
            records.append(r)
    if not records:
        raise CliError("result tables are empty", EXIT_CONFIG)
    reference = args.reference
    if reference is None:
        reference = records[0]["mode"]
    summary = summarize(records, reference=reference, alpha=args.alpha)
    out = Path(args.out or "hetcc-report")
    out.mkdir(parents=True, exist_ok=True)
    write_summary(summary, out / "summary.csv")
    curves = []
    for t in tables:
        curves.extend(sorted((t.parent / "traces").glob("*.curve.csv")) if (t.parent / "traces").is_dir() else [])
    if curves:
        with open(out / "curves.csv", "w", encoding="utf-8") as fh:
            fh.write("run,step,fes,cost\n")
            for c in curves:
                for line in c.read_text().splitlines()[1:]:
                    fh.write(f"{c.name[:-len('.curve.csv')]},{line}\n")
    _sidecar(out, "report", started)
    print(out / "summary.csv")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetcc",
        description="Learned optimizer selection for cooperative coevolution.",
        epilog="Environment: HETCC_WORKERS sets the worker-process count for run/ablate.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, budgets=True):
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--out", help="output directory")
        if budgets:
            p.add_argument("--manifest", help="experiment manifest (JSON)")
            p.add_argument("--instances", nargs="+", help="instance documents")
            p.add_argument("--pool", help=f"comma-separated optimizers, high tier first (default {','.join(DEFAULT_POOL)})")
            p.add_argument("--max-fes", dest="max_fes", type=int, help="evaluation budget per episode")
            p.add_argument("--step-fes", dest="step_fes", type=int, help="evaluations per decision step")
            p.add_argument("--decomposition", choices=("ground-truth", "dg"), help="grouping method")
            p.add_argument("--checkpoint", help="agent checkpoint file")

    g = sub.add_parser("gen", help="generate instance documents")
    common(g, budgets=False)
    g.add_argument("--config", help="JSON file with generation settings")
    g.add_argument("--preset", help="named suite; only 'appendix-b' is defined")
    g.add_argument("--scale", type=int, help="integer divisor applied to every subproblem dimension")
    g.add_argument("--dims", type=_ints, help="subproblem dimensions, e.g. 10,10")
    g.add_argument("--functions", type=_ints, help="basic function ids 1..7 per subproblem")
    g.add_argument("--degree", type=int, help="separability degree 1..5")
    g.add_argument("--name", help="instance name for flag-built instances")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the selection policy")
    common(t)
    t.add_argument("--epochs", type=int, help="training iterations")
    t.add_argument("--learning-rate", dest="learning_rate", type=float)
    t.add_argument("--num-envs", dest="num_envs", type=int, help="episodes per iteration")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="run episodes with one selection mode")
    common(r)
    r.add_argument("--mode", help="learned | greedy | random | fixed:<l> (1-based)")
    r.add_argument("--seeds", type=_ints, help="comma-separated run seeds")
    r.add_argument("--workers", type=int, help="worker processes (default HETCC_WORKERS or 1)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("ablate", help="compare learned, random and fixed selection")
    common(a)
    a.add_argument("--modes", nargs="+", help="modes to compare; the first is the reference")
    a.add_argument("--seeds", type=_ints, help="comma-separated run seeds")
    a.add_argument("--workers", type=int, help="worker processes (default HETCC_WORKERS or 1)")
    a.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="aggregate result tables")
    p.add_argument("tables", nargs="+", help="results.csv files")
    p.add_argument("--reference", help="reference column (default: first mode seen)")
    p.add_argument("--alpha", type=float, default=0.05, help="rank-sum significance level")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        print(f"hetcc: {err}", file=sys.stderr)
        return err.code
    except (InstanceConfigError, EpisodeConfigError, PoolConfigError) as err:
        print(f"hetcc: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DecompositionBudgetError, FloatingPointError, RuntimeError) as err:
        print(f"hetcc: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
