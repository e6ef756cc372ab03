"""Command-line entry point: ``patdisc {synth,train,grow,eval,complexity,bound}``.

Exit codes: 0 success, 2 usage/validation, 3 generation failure,
4 subset cap exceeded, 5 theorem condition violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from . import complexity as cx
from .core import (
    DEFAULT_CAP,
    CapExceededError,
    Observation,
    PatternCollection,
    PatternError,
    observation_table,
)
from .discovery import discover_all, evaluate, grow_pattern
from .loss import BlockLossConfig, IndividualLossConfig
from .model import FeatureConfig, ScoringModel, select_threshold, train_erm, with_threshold
from .synth import GenerationError, GenSpec, SizeDist, gen_blocks, gen_individual

EXIT_USAGE, EXIT_GENERATION, EXIT_CAP, EXIT_CONDITION = 2, 3, 4, 5
# flags that must not influence output bytes
_NON_SEMANTIC = {"threads", "output", "format", "handler", "command"}


class UsageError(ValueError):
    pass


def dataset_to_dict(Q: PatternCollection) -> dict:
    return {
        "observations": [Q.observations[i].to_dict() for i in sorted(Q.observations)],
        "patterns": [sorted(P) for P in Q.patterns],
    }


def dataset_from_dict(d: Mapping) -> PatternCollection:
    """Parse the dataset schema; observations outside every pattern become singleton patterns."""
    table = observation_table(Observation.from_dict(o) for o in d["observations"])
    patterns = [frozenset(str(i) for i in p) for p in d.get("patterns", [])]
    claimed = set().union(*patterns) if patterns else set()
    patterns += [frozenset([i]) for i in table if i not in claimed]
    return PatternCollection(tuple(patterns), table)


def load_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def load_dataset(path: str | Path) -> PatternCollection:
    return dataset_from_dict(load_json(path))


def load_blocks(path: str | Path) -> list[PatternCollection]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise UsageError(f"no block files in {p}")
        return [load_dataset(f) for f in files]
    return [load_dataset(p)]


def load_model(path: str | Path) -> ScoringModel:
    try:
        return ScoringModel.from_dict(load_json(path))
    except (KeyError, TypeError) as e:
        raise UsageError(f"malformed model file {path}: {e}") from None


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    try:
        return max(1, int(os.environ.get("PF_THREADS", "1")))
    except ValueError:
        return 1


def provenance(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _NON_SEMANTIC}
    return {"command": args.command, "flags": flags, "seed": args.seed, "tool_version": __version__}


def _flatten(obj, prefix="") -> list[tuple[str, Any]]:
    if isinstance(obj, Mapping):
        out = []
        for k in obj:
            out += _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (Mapping, list, tuple)) for v in obj):
            return [(prefix, ";".join(str(v) for v in obj))]
        out = []
        for i, v in enumerate(obj):
            out += _flatten(v, f"{prefix}.{i}")
        return out
    return [(prefix, obj)]


def render(payload: dict, fmt: str) -> str:
    if fmt == "csv-summary":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(_flatten(payload))
        return buf.getvalue()
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit(payload: dict, args) -> None:
    text = render(payload, args.format)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _gen_spec(args) -> GenSpec:
    return GenSpec(
        kind=args.kind,
        n_patterns=args.patterns,
        size_dist=SizeDist.parse(args.size_dist),
        cluster_spread=args.spread,
        inter_cluster_distance=args.distance,
        noise_singletons=args.noise,
        rng_seed=args.seed,
        dim=args.dim,
        shapes=tuple(args.shapes.split(",")) if args.shapes else None,
    )


def cmd_synth(args) -> int:
    spec = _gen_spec(args)
    prov = provenance(args)
    if args.blocks > 1:
        if not args.output:
            raise UsageError("--blocks > 1 needs --output naming a directory")
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        width = len(str(args.blocks - 1))
        for k, Q in enumerate(gen_blocks(spec, args.blocks)):
            payload = dataset_to_dict(Q) | {"provenance": prov | {"block": k}}
            (out / f"block_{k:0{width}d}.json").write_text(render(payload, "json"), encoding="utf-8")
        return 0
    emit(dataset_to_dict(gen_individual(spec)) | {"provenance": prov}, args)
    return 0


def cmd_train(args) -> int:
    Q = load_dataset(args.data)
    cfg = IndividualLossConfig(args.alpha, args.cap)
    kind = next(iter(Q.observations.values())).kind
    fc = FeatureConfig(kind=kind, similarity=args.similarity, scale=args.scale)
    model = train_erm(
        Q, cfg, fc,
        max_iters=args.iters, learning_rate=args.lr, restarts=args.restarts,
        rng_seed=args.seed, threads=_threads(args),
    )
    selected = select_threshold(model, Q, cfg)
    model = with_threshold(model, Q, cfg)
    payload = model.to_dict() | {
        "empirical_risk": model.meta["risk"],
        "converged": model.meta["converged"],
        "selected_threshold": selected,
        "provenance": provenance(args),
    }
    if args.output:
        print(f"empirical_risk={model.meta['risk']!r}")
    emit(payload, args)
    return 0


def _parse_ids(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_grow(args) -> int:
    Q = load_dataset(args.data)
    model = load_model(args.model)
    theta = args.theta_override
    X = Q.X
    if args.all:
        traces = discover_all(model, X, Q.observations, max_size=args.max_size, theta=theta)
        payload = {"traces": [t.to_dict() for t in traces]}
    else:
        if not args.seed_ids:
            raise UsageError("give --seed-ids or --all")
        seed = _parse_ids(args.seed_ids)
        unknown = sorted(set(seed) - X)
        if unknown:
            raise UsageError(f"unknown seed ids {unknown}")
        payload = grow_pattern(model, X, seed, Q.observations, max_size=args.max_size, theta=theta).to_dict()
    emit(payload | {"provenance": provenance(args)}, args)
    return 0


def _predicted_sets(obj) -> list[list[str]]:
    if isinstance(obj, list):
        return [list(p["final"]) if isinstance(p, Mapping) else list(p) for p in obj]
    if "traces" in obj:
        return [t["final"] for t in obj["traces"]]
    if "final" in obj:
        return [obj["final"]]
    if "patterns" in obj:
        return [list(p) for p in obj["patterns"]]
    raise UsageError("unrecognized predicted-pattern file")


def cmd_eval(args) -> int:
    truth = load_dataset(args.truth)
    predicted = _predicted_sets(load_json(args.predicted))
    metrics = evaluate(predicted, truth)
    emit(metrics | {"provenance": provenance(args)}, args)
    return 0


def cmd_complexity(args) -> int:
    Q = load_dataset(args.data)
    cfg = IndividualLossConfig(args.alpha, args.cap)
    models = [load_model(p) for p in args.model or []]
    fc = models[0].feature_config if models else FeatureConfig(kind=next(iter(Q.observations.values())).kind)
    threads = _threads(args)
    candidates = cx.random_models(args.candidates, fc, args.seed) + models + [cx.L.zero_individual]
    draws = cx.make_sign_draws(len(Q), args.draws, args.seed)
    single = []
    for path, m in zip(args.model or [], models):
        row = {"model": path}
        for shifted in (True, False):
            tag = "shifted" if shifted else "unshifted"
            for absolute in (False, True):
                key = f"{tag}_{'abs' if absolute else 'signed'}"
                row[key] = cx.quasi_rademacher_single(m, Q, cfg, draws, absolute=absolute, shifted=shifted)
        single.append(row)
    B = max(len(P) for P in Q.patterns)
    payload = {
        "n": len(Q),
        "B": B,
        "alpha": args.alpha,
        "draws": len(draws),
        "exhaustive": draws.exhaustive,
        "single": single,
        "class": {
            "n_candidates": len(candidates),
            "shifted": cx.quasi_rademacher_class(candidates, Q, cfg, draws, shifted=True, threads=threads),
            "unshifted": cx.quasi_rademacher_class(candidates, Q, cfg, draws, shifted=False, threads=threads),
        },
        "estimation_error_bound": {
            "formula": "thm5.3",
            "delta": args.delta,
            "value": cx.estimation_error_bound(B, args.alpha, len(Q), args.delta),
        },
        "provenance": provenance(args),
    }
    emit(payload, args)
    return 0


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--formula {args.formula} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))


def cmd_bound(args) -> int:
    f = args.formula
    if f == "thm5.1":
        _need(args, "qhat", "b", "alpha", "n", "delta")
        report = cx.bound_individual_bounded(args.qhat, args.b, args.alpha, args.n, args.delta)
    elif f == "thm5.2":
        _need(args, "qhat", "c", "lam", "b0", "alpha", "n", "delta")
        report = cx.bound_individual_geometric(args.qhat, args.c, args.lam, args.b0, args.n, args.delta, args.alpha)
    elif f == "cor5.1":
        _need(args, "qhat", "b", "alpha", "m", "delta")
        report = cx.bound_observations(args.qhat, args.b, args.alpha, args.m, args.delta)
    elif f == "lem5.2":
        _need(args, "b0", "c", "lam")
        value = cx.expected_size_bound(args.b0, args.c, args.lam)
        report = cx.BoundReport("lem5.2", {"B0": args.b0, "C": args.c, "lambda": args.lam}, {"B_lambda_C": value}, rhs=value)
    elif f == "thm5.3":
        _need(args, "b", "alpha", "n", "delta")
        value = cx.estimation_error_bound(args.b, args.alpha, args.n, args.delta)
        report = cx.BoundReport(
            "thm5.3", {"B": args.b, "alpha": args.alpha, "n": args.n, "delta": args.delta},
            {"B_alpha": cx.b_alpha(args.b, args.alpha)}, concentration_term=value, rhs=value,
        )
    else:
        _need(args, "data", "delta")
        blocks = load_blocks(args.data)
        cfg = BlockLossConfig(args.selector, args.cap)
        models = [load_model(p) for p in args.model or []]
        fc = models[0].feature_config if models else FeatureConfig(kind=next(iter(blocks[0].observations.values())).kind)
        candidates = cx.random_models(args.candidates, fc, args.seed) + models + [cx.L.zero_block]
        metric = "loss" if f == "thm3.1" else "function"
        report = cx.dudley_bound_block(candidates, blocks, cfg, metric, args.delta)
    emit(report.to_dict() | {"provenance": provenance(args)}, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (env PF_THREADS)")
    common.add_argument("--output", "-o", default=None, help="output path (stdout if omitted)")
    common.add_argument("--format", choices=["json", "csv-summary"], default="json")

    parser = argparse.ArgumentParser(prog="patdisc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["feature-clusters", "line-shapes"], default="feature-clusters")
    p.add_argument("--patterns", type=int, default=10)
    p.add_argument("--size-dist", default="fixed:3", help="fixed:B | uniform:B | geometric:B0,C,lambda")
    p.add_argument("--noise", type=int, default=0)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--distance", type=float, default=4.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--shapes", default=None, help="comma-separated shape names for line-shapes")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="fit a scoring model by ERM")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=5.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--similarity", choices=["negexp", "cosine"], default="negexp")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("grow", parents=[common], help="grow patterns from seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed-ids", default=None)
    p.add_argument("--theta-override", type=float, default=None)
    p.add_argument("--all", action="store_true")
    p.add_argument("--max-size", type=int, default=None)
    p.set_defaults(handler=cmd_grow)

    p = sub.add_parser("eval", parents=[common], help="score predicted patterns against truth")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("complexity", parents=[common], help="quasi-Rademacher estimates")
    p.add_argument("--data", required=True)
    p.add_argument("--model", action="append")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--draws", type=int, default=cx.DEFAULT_DRAWS)
    p.add_argument("--candidates", type=int, default=0, help="number of random candidate models")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(handler=cmd_complexity)

    p = sub.add_parser("bound", parents=[common], help="evaluate a risk bound")
    p.add_argument("--formula", required=True, choices=["thm5.1", "thm5.2", "cor5.1", "thm3.1", "thm3.2", "lem5.2", "thm5.3"])
    p.add_argument("--qhat", type=float)
    p.add_argument("--b", type=int)
    p.add_argument("--b0", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--data", help="block file or directory (thm3.1/thm3.2)")
    p.add_argument("--model", action="append")
    p.add_argument("--candidates", type=int, default=10)
    p.add_argument("--selector", choices=["maximal", "posneg"], default="posneg")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(handler=cmd_bound)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.handler(args)
    except cx.ConditionViolated as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONDITION
    except CapExceededError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except GenerationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GENERATION
    except (UsageError, PatternError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
