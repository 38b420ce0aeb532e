"""Command-line drive for bank construction, classification, evaluation,
and the ablation sweeps.

Subcommands: build-db, select-seeds, classify, eval, ablate (and the
hidden gen-fixtures, which emits the synthetic domains the test and demo
scripts use). Each accepts --config pointing at one JSON file; flags
override config values. Exit codes: 0 success, 1 usage error, 2 data or
invariant error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from .bank import BankBudget, MemoryBank
from .core import ImageRecord, Manifest
from .errors import RacdetError
from .evaluation import EvalConfig, evaluate, format_report_table
from .fixtures import DOMAIN_PRESETS, generate, write_domain
from .rac import RacParams, classify_dataset
from .seeds import STRATEGIES, select_seeds
from . import io as rio
from .io import _atomic_write

__all__ = ["main", "entrypoint"]

_RAC_FIELDS = ("k", "n", "context_thresh", "instance_thresh", "w1", "w2")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise RacdetError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RacdetError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise RacdetError(f"config {path} must be a JSON object")
    return cfg


def _pick(args, cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return cfg.get(key, default)


def _require(args, cfg: dict, key: str):
    value = _pick(args, cfg, key)
    if value is None:
        raise RacdetError(f"missing required setting {key!r} (flag or config)")
    return value


def _rac_params(args, cfg: dict) -> RacParams:
    section = dict(cfg.get("rac", {}))
    for name in _RAC_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    return RacParams(**section)


def _eval_config(args, cfg: dict, manifest: Manifest) -> EvalConfig:
    section = dict(cfg.get("eval", {}))
    for name in ("iou_thresh", "max_dets_per_image"):
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    return EvalConfig(classes=manifest.classes, **section)


def _pools_by_hint(pool_images: list[ImageRecord]) -> dict[str, list[ImageRecord]]:
    if not any(r.class_hint for r in pool_images):
        return {"": list(pool_images)}
    pools: dict[str, list[ImageRecord]] = {}
    for record in pool_images:
        pools.setdefault(record.class_hint or "", []).append(record)
    return dict(sorted(pools.items()))


def _select_pool_seeds(
    pools: dict[str, list[ImageRecord]], budget: int, strategy: str, seed: int
) -> list[str]:
    selected: list[str] = []
    for name, pool in pools.items():
        if budget > len(pool):
            label = name or "<all>"
            print(
                f"warning: pool {label} has {len(pool)} images for budget {budget}; taking all",
                file=sys.stderr,
            )
        selected.extend(select_seeds(pool, budget, strategy, seed))
    return selected


def _build_bank_from_pool(
    manifest: Manifest, pool_images, pool_instances, selected_ids
) -> MemoryBank:
    chosen = set(selected_ids)
    return MemoryBank.from_records(
        manifest,
        [r for r in pool_images if r.image_id in chosen],
        [r for r in pool_instances if r.image_id in chosen],
    )


# -- commands ----------------------------------------------------------------


def _cmd_build_db(args) -> int:
    cfg = _load_config(args.config)
    manifest = rio.read_manifest(_require(args, cfg, "manifest"))
    images = rio.read_records(_require(args, cfg, "images"), "images", manifest=manifest)
    instances = rio.read_records(
        _require(args, cfg, "instances"), "instances", manifest=manifest
    )
    bank = MemoryBank.from_records(manifest, images, instances)
    if not instances:
        print("warning: no instances; bank holds images only", file=sys.stderr)
    out = _require(args, cfg, "out")
    bank.save(out)
    width = max((len(n) for n in manifest.classes), default=5)
    print(f"bank written to {out}: {bank.image_count} images, {bank.instance_count} instances")
    for label, count in bank.per_class_counts.items():
        print(f"  {label.name.ljust(width)}  {count}")
    return 0


def _cmd_select_seeds(args) -> int:
    cfg = _load_config(args.config)
    pool_path = _require(args, cfg, "pool")
    manifest = None
    manifest_path = _pick(args, cfg, "manifest")
    if manifest_path is not None:
        manifest = rio.read_manifest(manifest_path)
    pool = rio.read_records(pool_path, "images", manifest=manifest)
    if not pool:
        raise RacdetError(f"pool {pool_path} is empty")
    budget = BankBudget(int(_pick(args, cfg, "budget", 10)))
    strategy = _pick(args, cfg, "strategy", "centroid")
    seed = int(_pick(args, cfg, "seed", cfg.get("rng_seed", 0)))
    selected = _select_pool_seeds(
        _pools_by_hint(pool), budget.max_images_per_class, strategy, seed
    )
    for image_id in selected:
        print(image_id)
    return 0


def _cmd_classify(args) -> int:
    cfg = _load_config(args.config)
    bank = MemoryBank.load(_require(args, cfg, "bank"))
    snapshot = bank.snapshot()
    queries = rio.read_records(
        _require(args, cfg, "queries"), "images", manifest=snapshot.manifest
    )
    proposals = rio.read_records(
        _require(args, cfg, "proposals"), "proposals", manifest=snapshot.manifest
    )
    params = _rac_params(args, cfg)

    start = time.perf_counter()
    detections = classify_dataset(queries, proposals, snapshot, params)
    elapsed = time.perf_counter() - start

    out = _require(args, cfg, "out")
    rio.write_records(out, detections)
    if not detections and proposals:
        print("warning: no proposal survived retrieval; output is empty", file=sys.stderr)
    print(
        f"classified {len(proposals)} proposals over {len(queries)} images: "
        f"{len(detections)} detections in {elapsed:.2f}s -> {out}"
    )
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    manifest = rio.read_manifest(_require(args, cfg, "manifest"))
    detections = rio.read_records(
        _require(args, cfg, "detections"), "detections", manifest=manifest
    )
    groundtruth = rio.read_records(
        _require(args, cfg, "groundtruth"), "groundtruth", manifest=manifest
    )
    eval_cfg = _eval_config(args, cfg, manifest)
    report = evaluate(detections, groundtruth, eval_cfg)
    print(format_report_table(report, eval_cfg))
    out = _pick(args, cfg, "out")
    if out is not None:
        _atomic_write(out, json.dumps(report.to_json_dict(), ensure_ascii=False, indent=2) + "\n")
        print(f"report written to {out}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    sweep = dict(cfg.get("sweep", {}))
    if args.axis is not None:
        sweep["axis"] = args.axis
    if args.values is not None:
        sweep["values"] = args.values.split(",")
    axis = sweep.get("axis")
    values = sweep.get("values")
    if not axis or not values:
        raise RacdetError("ablate needs a sweep axis and values (config 'sweep' or flags)")

    manifest = rio.read_manifest(_require(args, cfg, "manifest"))
    queries = rio.read_records(_require(args, cfg, "queries"), "images", manifest=manifest)
    proposals = rio.read_records(
        _require(args, cfg, "proposals"), "proposals", manifest=manifest
    )
    groundtruth = rio.read_records(
        _require(args, cfg, "groundtruth"), "groundtruth", manifest=manifest
    )
    params = _rac_params(args, cfg)
    eval_cfg = _eval_config(args, cfg, manifest)
    seed = int(_pick(args, cfg, "seed", cfg.get("rng_seed", 0)))
    budget = BankBudget(int(_pick(args, cfg, "budget", 10))).max_images_per_class
    strategy = _pick(args, cfg, "strategy", "centroid")

    pools = None
    if cfg.get("pool_images"):
        pool_images = rio.read_records(cfg["pool_images"], "images", manifest=manifest)
        pool_instances = rio.read_records(
            cfg["pool_instances"], "instances", manifest=manifest
        )
        pools = _pools_by_hint(pool_images)

    def bank_for(selection_budgets: dict[str, int], strat: str) -> MemoryBank:
        if pools is None:
            raise RacdetError("this sweep axis needs pool_images/pool_instances in config")
        selected: list[str] = []
        for name, pool in pools.items():
            pool_budget = selection_budgets[name]
            if pool_budget >= 1:
                selected.extend(select_seeds(pool, pool_budget, strat, seed))
        return _build_bank_from_pool(manifest, pool_images, pool_instances, selected)

    def even_budgets(total: int) -> dict[str, int]:
        names = list(pools)
        base, rem = divmod(total, len(names))
        return {name: base + (1 if i < rem else 0) for i, name in enumerate(names)}

    fixed_bank = None
    if axis not in ("db_size", "strategy"):
        if axis not in _RAC_FIELDS:
            raise RacdetError(f"unknown sweep axis {axis!r}")
        if cfg.get("bank"):
            fixed_bank = MemoryBank.load(cfg["bank"])
        else:
            fixed_bank = bank_for(even_budgets(budget * len(pools)), strategy)

    rows = ["value,mAP,mAR"]
    for value in values:
        try:
            if axis == "db_size":
                bank = bank_for(even_budgets(int(value)), strategy)
                run_params = params
            elif axis == "strategy":
                if value not in STRATEGIES:
                    raise RacdetError(f"unknown strategy {value!r}")
                bank = bank_for({name: budget for name in pools}, str(value))
                run_params = params
            else:
                bank = fixed_bank
                field = float(value) if axis not in ("k", "n") else int(value)
                updates = {axis: field}
                if axis == "w1":
                    updates["w2"] = 1.0 - float(value)
                run_params = dataclasses.replace(params, **updates)
            detections = classify_dataset(queries, proposals, bank.snapshot(), run_params)
            report = evaluate(detections, groundtruth, eval_cfg)
        except (RacdetError, ValueError) as exc:
            raise RacdetError(f"sweep failed at {axis}={value}: {exc}") from exc
        rows.append(f"{value},{report.mean_ap!r},{report.mean_ar!r}")
        print(rows[-1])

    out = _pick(args, cfg, "out")
    if out is not None:
        _atomic_write(out, "\n".join(rows) + "\n")
        print(f"sweep written to {out}")
    return 0


def _cmd_gen_fixtures(args) -> int:
    cfg = _load_config(args.config)
    name = _pick(args, cfg, "domain", "easy")
    if name not in DOMAIN_PRESETS:
        raise RacdetError(f"unknown domain {name!r}; choose from {sorted(DOMAIN_PRESETS)}")
    seed = int(_pick(args, cfg, "seed", cfg.get("rng_seed", 0)))
    overrides = {}
    if args.queries is not None:
        overrides["n_queries"] = args.queries
    if args.pool_per_class is not None:
        overrides["pool_per_class"] = args.pool_per_class
    domain = generate(DOMAIN_PRESETS[name](rng_seed=seed, **overrides))
    out = _require(args, cfg, "out")
    write_domain(domain, out)
    print(
        f"{name} domain written to {out}: {len(domain.pool_images)} pool images, "
        f"{len(domain.pool_instances)} pool instances, {len(domain.queries)} queries, "
        f"{len(domain.proposals)} proposals"
    )
    return 0


# -- parser ------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", help="output path")


def _build_parser() -> _Parser:
    parser = _Parser(prog="racdet", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(
        dest="command",
        metavar="{build-db,select-seeds,classify,eval,ablate}",
    )

    p = subparsers.add_parser("build-db", parents=[], help="ingest images + instances into a persisted bank")
    p.add_argument("--manifest")
    p.add_argument("--images")
    p.add_argument("--instances")
    _add_common(p)
    p.set_defaults(func=_cmd_build_db)

    p = subparsers.add_parser("select-seeds", help="pick which pool images to label")
    p.add_argument("--pool", help="candidate pool images JSONL")
    p.add_argument("--manifest")
    p.add_argument("--budget", type=int)
    p.add_argument("--strategy", choices=STRATEGIES)
    _add_common(p)
    p.set_defaults(func=_cmd_select_seeds)

    p = subparsers.add_parser("classify", help="classify proposals against a bank")
    p.add_argument("--bank", help="bank directory")
    p.add_argument("--queries")
    p.add_argument("--proposals")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--context-thresh", type=float, dest="context_thresh")
    p.add_argument("--instance-thresh", type=float, dest="instance_thresh")
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    _add_common(p)
    p.set_defaults(func=_cmd_classify)

    p = subparsers.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--manifest")
    p.add_argument("--detections")
    p.add_argument("--groundtruth")
    p.add_argument("--iou-thresh", type=float, dest="iou_thresh")
    p.add_argument("--max-dets", type=int, dest="max_dets_per_image")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = subparsers.add_parser("ablate", help="sweep one axis and emit CSV of (value, mAP, mAR)")
    p.add_argument("--axis", help="db_size | strategy | a retrieval parameter name")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--budget", type=int)
    p.add_argument("--strategy", choices=STRATEGIES)
    _add_common(p)
    p.set_defaults(func=_cmd_ablate)

    p = subparsers.add_parser("gen-fixtures")  # hidden from the metavar above
    p.add_argument("--domain", choices=sorted(DOMAIN_PRESETS))
    p.add_argument("--queries", type=int)
    p.add_argument("--pool-per-class", type=int, dest="pool_per_class")
    _add_common(p)
    p.set_defaults(func=_cmd_gen_fixtures)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (RacdetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())
