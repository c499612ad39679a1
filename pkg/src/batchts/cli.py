"""Command-line front end.

Subcommands::

    batchts run      one experiment -> regret curve + batch summary
    batchts sweep    algorithms x horizons -> long-format table
    batchts datasets list the built-in instances
    batchts ingest   MovieLens ratings file -> instance JSON

Settings resolve as defaults < ``--config`` file < command-line flags <
``--set key=value`` pairs.  Exit codes: 0 success, 2 usage error, 3 input
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .exceptions import InputError, UsageError
from .ingest import CATALOGUE, builtin, movielens_instance, resolve_instance, save_instance
from .simulator import ALGORITHMS, ExperimentSpec, check_algorithm, run_experiment

CONFIG_SCHEMA = 1

DEFAULTS = {
    "dataset": None,
    "algorithm": None,
    "horizon": None,
    "reps": 100,
    "seed": 0,
    "alpha": 1.0,
    "beta": 100.0,
    "rounds": 20,
    "no_prune": False,
    "skip_init": False,
    "theory_alpha": False,
    "format": "csv",
    "out": "-",
    "jobs": 1,
    "checkpoints": None,
    "horizons": None,
    "algorithms": None,
}

_POLICY_KEYS = ("alpha", "beta", "rounds", "no_prune", "skip_init", "theory_alpha")
_BOOL_KEYS = {"no_prune", "skip_init", "theory_alpha"}
_INT_KEYS = {"horizon", "reps", "seed", "jobs"}
_FLOAT_KEYS = {"alpha", "beta"}


def fmt(x) -> str:
    """Six significant digits; integers stay integers."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".6g")


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(format(x, ".6g"))


def _coerce(key: str, value):
    if value is None:
        return None
    try:
        if key in _BOOL_KEYS:
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if key in _INT_KEYS:
            return int(float(value)) if isinstance(value, str) else int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "rounds":
            return value if value in ("log", "loglog") else int(value)
        if key in ("horizons", "checkpoints"):
            items = value.split(",") if isinstance(value, str) else value
            return [int(float(v)) for v in items]
        if key == "algorithms":
            items = value.split(",") if isinstance(value, str) else value
            return [str(v).strip() for v in items if str(v).strip()]
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def load_config(path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise InputError(f"{path}: config must be a JSON object")
    if payload.get("schema") != CONFIG_SCHEMA:
        raise InputError(f"{path}: unsupported config schema {payload.get('schema')!r} "
                         f"(expected {CONFIG_SCHEMA})")
    unknown = set(payload) - set(DEFAULTS) - {"schema"}
    if unknown:
        raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
    return {k: v for k, v in payload.items() if k != "schema"}


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, flags and ``--set`` overrides, in that order."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            settings[key] = value
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in DEFAULTS:
            raise UsageError(f"--set expects KEY=VALUE with KEY in {sorted(DEFAULTS)}, got {item!r}")
        settings[key] = value
    return {k: _coerce(k, v) for k, v in settings.items()}


def _require(settings: dict, *keys: str) -> None:
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(missing))


def _params(settings: dict) -> dict:
    return {k: settings[k] for k in _POLICY_KEYS}


def _spec(settings: dict, algorithm: str, horizon: int) -> ExperimentSpec:
    check_algorithm(algorithm)
    checkpoints = settings.get("checkpoints")
    return ExperimentSpec(
        instance=resolve_instance(settings["dataset"]),
        algorithm=algorithm,
        horizon=horizon,
        repetitions=settings["reps"],
        master_seed=settings["seed"],
        params=_params(settings),
        checkpoints=tuple(checkpoints) if checkpoints else (),
    )


def _spec_json(spec: ExperimentSpec) -> dict:
    d = spec.to_dict()
    d["means"] = [_num(m) for m in d["means"]]
    d["params"] = {k: (_num(v) if isinstance(v, float) else v) for k, v in d["params"].items()}
    return d


def _write(text: str, out: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def render_run(spec: ExperimentSpec, result, fmt_name: str) -> str:
    if fmt_name == "json":
        payload = {
            "spec": _spec_json(spec),
            "results": {
                "checkpoints": list(result.checkpoints),
                "mean_regret": [_num(v) for v in result.mean_regret],
                "std_regret": [_num(v) for v in result.std_regret],
                "mean_batches": _num(result.mean_batches),
                "min_batches": result.min_batches,
                "max_batches": result.max_batches,
                "final_regrets": [_num(v) for v in result.final_regrets],
            },
        }
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "mean_regret", "std_regret"])
    for t, m, s in zip(result.checkpoints, result.mean_regret, result.std_regret):
        writer.writerow([t, fmt(m), fmt(s)])
    buf.write(f"# batches mean={fmt(result.mean_batches)} min={result.min_batches} "
              f"max={result.max_batches}\n")
    return buf.getvalue()


SWEEP_COLUMNS = ["algorithm", "T", "mean_regret", "std_regret",
                 "mean_batches", "min_batches", "max_batches"]


def render_sweep(settings: dict, rows: list[dict], fmt_name: str) -> str:
    if fmt_name == "json":
        spec = {k: settings[k] for k in ("dataset", "algorithms", "horizons", "reps", "seed")}
        spec["params"] = {k: (_num(v) if isinstance(v, float) else v)
                          for k, v in sorted(_params(settings).items())}
        results = [{k: (_num(r[k]) if isinstance(r[k], float) else r[k]) for k in SWEEP_COLUMNS}
                   for r in rows]
        return json.dumps({"spec": spec, "results": results}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([fmt(r[k]) if not isinstance(r[k], str) else r[k] for k in SWEEP_COLUMNS])
    return buf.getvalue()


def run_command(settings: dict) -> int:
    _require(settings, "dataset", "algorithm", "horizon")
    spec = _spec(settings, settings["algorithm"], settings["horizon"])
    result = run_experiment(spec, jobs=settings["jobs"])
    _write(render_run(spec, result, settings["format"]), settings["out"])
    return 0


def sweep_command(settings: dict) -> int:
    _require(settings, "dataset", "horizons")
    algorithms = settings.get("algorithms")
    if not algorithms:
        if settings.get("algorithm"):
            algorithms = [settings["algorithm"]]
        else:
            raise UsageError("sweep needs a nonempty algorithm list (--algorithms a,b,...)")
    for name in algorithms:
        check_algorithm(name)
    settings = dict(settings, algorithms=algorithms)
    rows = []
    for name in algorithms:
        for horizon in settings["horizons"]:
            spec = _spec(settings, name, horizon)
            res = run_experiment(spec, jobs=settings["jobs"])
            rows.append({
                "algorithm": name,
                "T": horizon,
                "mean_regret": float(res.final_mean_regret),
                "std_regret": float(res.std_regret[-1]),
                "mean_batches": float(res.mean_batches),
                "min_batches": res.min_batches,
                "max_batches": res.max_batches,
            })
    _write(render_sweep(settings, rows, settings["format"]), settings["out"])
    return 0


def datasets_command(out=None) -> int:
    lines = []
    for name in CATALOGUE:
        inst = builtin(name)
        means = " ".join(fmt(m) for m in inst.means)
        gaps = " ".join(fmt(g) for g in inst.gaps)
        lines.append(f"{name}, {inst.num_arms} arms, Δ = {fmt(inst.min_gap)}, "
                     f"means = {means}, gaps = {gaps}\n")
    _write("".join(lines), out or "-")
    return 0


def ingest_command(args: argparse.Namespace) -> int:
    instance = movielens_instance(
        args.ratings, min_ratings=args.min_ratings, rating_scale=args.scale,
        movie_col=args.movie_col, rating_col=args.rating_col, delimiter=args.delimiter,
    )
    save_instance(instance, args.out)
    print(f"wrote {instance.num_arms} arms to {args.out}", file=sys.stderr)
    return 0


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file (schema 1)")
    p.add_argument("--dataset", help=f"one of {', '.join(CATALOGUE)} or an instance .json path")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--alpha", type=float, help="belief variance scale (default 1)")
    p.add_argument("--beta", type=float, help="pruning ratio (default 100; inf disables)")
    p.add_argument("--rounds", help="batch-round parameter M: integer, 'log' or 'loglog'")
    p.add_argument("--no-prune", dest="no_prune", action="store_true", default=None)
    p.add_argument("--skip-init", dest="skip_init", action="store_true", default=None,
                   help="BTSI without the initialization batch")
    p.add_argument("--theory-alpha", dest="theory_alpha", action="store_true", default=None,
                   help="alpha = ln(2T)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", metavar="PATH", help="output file ('-' for stdout)")
    p.add_argument("--jobs", type=int, help="worker processes for replications")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any setting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchts", description="Batched Thompson sampling benchmarks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    _add_experiment_flags(run)
    run.add_argument("--algorithm", help=f"one of {', '.join(ALGORITHMS)}")
    run.add_argument("--horizon", type=int)
    run.add_argument("--checkpoints", help="comma-separated times ending at the horizon")

    sweep = sub.add_parser("sweep", help="run algorithms x horizons")
    _add_experiment_flags(sweep)
    sweep.add_argument("--algorithms", help="comma-separated algorithm names")
    sweep.add_argument("--horizons", help="comma-separated horizons")

    ds = sub.add_parser("datasets", help="list built-in datasets")
    ds.add_argument("--out", metavar="PATH")

    ing = sub.add_parser("ingest", help="build an instance from a MovieLens ratings file")
    ing.add_argument("--ratings", required=True, metavar="PATH")
    ing.add_argument("--out", required=True, metavar="PATH", help="instance JSON to write")
    ing.add_argument("--min-ratings", type=int, default=20000)
    ing.add_argument("--scale", type=float, default=5.0, help="rating scale divisor")
    ing.add_argument("--movie-col", default="movieId")
    ing.add_argument("--rating-col", default="rating")
    ing.add_argument("--delimiter", default=",")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "datasets":
            return datasets_command(args.out)
        if args.command == "ingest":
            return ingest_command(args)
        settings = resolve_settings(args)
        if args.command == "run":
            return run_command(settings)
        return sweep_command(settings)
    except UsageError as exc:
        print(f"batchts: error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"batchts: input error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
