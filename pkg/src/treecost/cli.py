"""Command-line entry point: ``treecost <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .catalog import CatalogError, Database, SchemaCatalog
from .features import FeatureError
from .nn import CheckpointError, NonFiniteError
from .plan import PlanError, parse_plan, serialize_plan

EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 1, 2, 3
log = logging.getLogger("treecost")


class DataError(Exception):
    pass


class ModelError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ------------------------------------------------------------ helpers


def _load_db(args) -> Database:
    if not args.data_dir:
        raise DataError("--data-dir is required")
    try:
        db = Database.load(args.data_dir)
    except FileNotFoundError as e:
        raise DataError(f"cannot read dataset: {e}") from None
    if getattr(args, "schema", None):
        other = SchemaCatalog.load(args.schema)
        if other.fingerprint() != db.catalog.fingerprint():
            raise DataError(f"{args.schema} does not match the schema stored in {args.data_dir}")
    return db


def _plan_files(args) -> list[Path]:
    files = []
    if getattr(args, "workload_dir", None):
        d = Path(args.workload_dir)
        if not d.is_dir():
            raise DataError(f"workload directory {d} does not exist")
        files += sorted(d.glob("*.json"))
    files += [Path(p) for p in getattr(args, "plans", []) or []]
    if not files:
        raise DataError("no plan files given")
    return files


def _read_plans(files: list[Path]):
    plans = []
    for f in files:
        try:
            plans.append(parse_plan(f.read_text()))
        except OSError as e:
            raise DataError(str(e)) from None
        except PlanError as e:
            raise DataError(f"{f}: {e}") from None
    return plans


def _encoder_from(meta: dict, dict_path: str | None, dim: int):
    from .strings import DictionaryEncoder, HashBitmapEncoder, build_tries
    from .strings.storage import load_dictionary

    kind = meta.get("encoder", "hash")
    if kind == "embed":
        path = dict_path or meta.get("dict")
        if not path:
            raise ModelError("checkpoint uses a substring dictionary; pass --dict")
        return DictionaryEncoder(build_tries(load_dictionary(path)))
    return HashBitmapEncoder(dim)


def _load_model(args, db: Database):
    from .features import Featurizer
    from .catalog import SampleStore
    from .model import load_checkpoint

    if not args.checkpoint:
        raise ModelError("--checkpoint is required")
    try:
        model, norm, extra = load_checkpoint(args.checkpoint)
    except FileNotFoundError as e:
        raise ModelError(f"cannot read checkpoint: {e}") from None
    if extra.get("schema") and extra["schema"] != db.catalog.fingerprint():
        raise ModelError("checkpoint was trained on a different schema")
    enc = _encoder_from(extra, args.dict, model.widths["string_dim"])
    store = SampleStore.build(db, size=extra.get("sample_size", 1000), seed=extra.get("sample_seed", 0))
    fz = Featurizer(db.catalog, store, enc)
    if fz.widths != model.widths:
        raise ModelError(f"feature widths {fz.widths} do not match checkpoint {model.widths}")
    return model, norm, fz


# ------------------------------------------------------------ commands


def cmd_gen_data(args) -> int:
    from .train.data import DatasetConfig, generate_dataset

    db = generate_dataset(DatasetConfig(titles=args.titles, infos=args.infos, casts=args.casts, seed=args.seed))
    db.save(args.data_dir)
    if args.schema:
        db.catalog.save(args.schema)
    print(f"wrote {len(db.catalog.tables)} tables to {args.data_dir}")
    return 0


def cmd_gen_queries(args) -> int:
    from .train.pipeline import label_workload
    from .train.workload import WorkloadConfig, generate_queries

    db = _load_db(args)
    lo, _, hi = args.tables.partition("-")
    cfg = WorkloadConfig(n_queries=args.n_queries, tables=(int(lo), int(hi or lo)), seed=args.seed)
    plans = generate_queries(db, cfg)
    if not args.no_label:
        plans = label_workload(db, plans)
    out = Path(args.workload_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(plans):
        (out / f"q{i:05d}.json").write_text(serialize_plan(p) + "\n")
    print(f"wrote {len(plans)} plans to {out}")
    return 0


def cmd_mine_rules(args) -> int:
    from .strings.storage import save_dictionary, save_rules
    from .train.pipeline import build_string_encoder

    if not args.dict:
        raise DataError("--dict (output path) is required")
    db = _load_db(args)
    plans = _read_plans(_plan_files(args))
    sm = build_string_encoder("embed", db, plans, dim=args.dim, seed=args.seed, budget=args.budget,
                              epochs=args.skipgram_epochs)
    merged = sm.dictionary
    rules = merged.rules
    save_dictionary(merged, args.dict)
    if args.rules_out:
        save_rules(rules, args.rules_out)
    print(f"{len(rules)} rules, {len(merged)} substrings -> {args.dict}")
    return 0


def _labelled(plans):
    bad = [i for i, p in enumerate(plans) if p.true_card is None or p.true_cost is None]
    if bad:
        raise DataError(f"{len(bad)} plans lack true_card/true_cost labels (first: #{bad[0]})")
    return plans


def cmd_train(args) -> int:
    from .features import Featurizer
    from .catalog import SampleStore
    from .model import ModelConfig, TreeCostModel, save_checkpoint
    from .train.loop import TrainConfig, cross_validate_omega, train

    db = _load_db(args)
    plans = _labelled(_read_plans(_plan_files(args)))
    meta = {"encoder": "embed" if args.dict else "hash", "dict": args.dict}
    enc = _encoder_from(meta, args.dict, args.string_dim)
    store = SampleStore.build(db, size=args.sample_size, seed=args.seed)
    fz = Featurizer(db.catalog, store, enc)
    trees = [fz.encode_tree(p) for p in plans]
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr, seed=args.seed,
                      omega=args.omega or 1.0, patience=args.patience)

    def make():
        return TreeCostModel(fz.widths, ModelConfig(seed=args.seed))

    if args.omega is None:
        cv_cfg = TrainConfig(**{**cfg.__dict__, "epochs": max(1, args.epochs // 3)})
        cfg.omega, table = cross_validate_omega(make, trees, cv_cfg)
        print("omega cross-validation: " + ", ".join(f"{w:g}={v:.4g}" for w, v in table.items()))
    model = make()
    norm, hist = train(model, trees, cfg)
    extra = {
        **meta,
        "omega": cfg.omega,
        "seed": args.seed,
        "sample_size": args.sample_size,
        "sample_seed": args.seed,
        "schema": db.catalog.fingerprint(),
        "best_epoch": hist.best_epoch,
    }
    save_checkpoint(args.checkpoint, model, norm, extra)
    print(f"trained {hist.steps} steps, best epoch {hist.best_epoch}, omega {cfg.omega:g} -> {args.checkpoint}")
    return 0


def cmd_estimate(args) -> int:
    from .pool import Estimator, MemoryPool

    db = _load_db(args)
    files = _plan_files(args)
    plans = _read_plans(files)
    model, norm, fz = _load_model(args, db)
    pool = MemoryPool(args.pool_capacity) if args.pool_capacity > 0 else None
    est = Estimator(model, norm, fz, pool)
    print("plan\tcost\tcard")
    for f, p in zip(files, plans):
        cost, card = est.estimate(p)
        print(f"{f.name}\t{cost:.6g}\t{card:.6g}")
    hits = pool.hits if pool else 0
    print(f"cell evaluations: {model.counters.cell_calls}, pool hits: {hits}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    from .train.baseline import IndependenceBaseline
    from .train.evaluate import Evaluation
    from .train.loop import predict

    db = _load_db(args)
    files = _plan_files(args)
    plans = _labelled(_read_plans(files))
    cost_t = np.array([p.true_cost for p in plans])
    card_t = np.array([p.true_card for p in plans])
    ev = Evaluation()
    if args.checkpoint:
        model, norm, fz = _load_model(args, db)
        cost_e, card_e = predict(model, norm, [fz.encode_tree(p) for p in plans])
        ev.add("model", cost_t, cost_e, card_t, card_e)
    if args.oracle:
        ev.add("oracle", cost_t, cost_t, card_t, card_t)
    if not args.no_baseline:
        bl = IndependenceBaseline(db)
        est = np.array([bl.estimate(p) for p in plans])
        ev.add("baseline", cost_t, est[:, 0], card_t, est[:, 1])
    if not ev.sets:
        raise DataError("nothing to evaluate: give --checkpoint or --oracle")
    if args.metrics_out:
        raw = args.raw_out or str(Path(args.metrics_out).with_suffix(".errors.tsv"))
        ev.write(args.metrics_out, raw, [f.stem for f in files])
    sys.stdout.write(ev.table())
    return 0


# ------------------------------------------------------------ parser


def build_parser() -> _Parser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="treecost", description="Learned cost and cardinality estimation for query plans.",
                formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, workload=True):
        sp.add_argument("--data-dir", help="dataset directory (schema.txt + table files)")
        sp.add_argument("--schema", help="schema catalog file; checked against the dataset when given")
        sp.add_argument("--seed", type=int, default=0, help="random seed")
        if workload:
            sp.add_argument("--workload-dir", help="directory of plan files (*.json)")

    sp = sub.add_parser("gen-data", help="generate the synthetic dataset", formatter_class=fmt)
    sp.add_argument("--data-dir", required=True, help="output directory")
    sp.add_argument("--schema", help="also write the schema catalog here")
    sp.add_argument("--seed", type=int, default=0, help="random seed")
    sp.add_argument("--titles", type=int, default=10_000, help="rows in title")
    sp.add_argument("--infos", type=int, default=10_000, help="rows in movie_info")
    sp.add_argument("--casts", type=int, default=0, help="rows in cast_info (0 omits the table)")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("gen-queries", help="generate (and label) query plans", formatter_class=fmt)
    common(sp)
    sp.add_argument("--n-queries", type=int, default=1000, help="number of plans")
    sp.add_argument("--tables", default="1-2", help="joined tables per query, e.g. 1-2")
    sp.add_argument("--no-label", action="store_true", help="skip the reference executor")
    sp.set_defaults(func=cmd_gen_queries)

    sp = sub.add_parser("mine-rules", help="mine string rules and train substring embeddings", formatter_class=fmt)
    common(sp)
    sp.add_argument("--dict", help="output dictionary file")
    sp.add_argument("--rules-out", help="output rules text file")
    sp.add_argument("--budget", type=int, default=None, help="substring budget B (default 10 x workload strings)")
    sp.add_argument("--dim", type=int, default=64, help="embedding width d_s")
    sp.add_argument("--skipgram-epochs", type=int, default=5, help="skip-gram passes")
    sp.set_defaults(func=cmd_mine_rules)

    sp = sub.add_parser("train", help="train a model on labelled plans", formatter_class=fmt)
    common(sp)
    sp.add_argument("--checkpoint", required=True, help="output checkpoint")
    sp.add_argument("--dict", help="substring dictionary (hash bitmaps when omitted)")
    sp.add_argument("--omega", type=float, default=None, help="cost loss weight (cross-validated when omitted)")
    sp.add_argument("--epochs", type=int, default=30, help="max epochs")
    sp.add_argument("--batch-size", type=int, default=64, help="plans per batch")
    sp.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    sp.add_argument("--patience", type=int, default=5, help="early-stopping patience in epochs")
    sp.add_argument("--sample-size", type=int, default=1000, help="sample rows per table (bitmap length)")
    sp.add_argument("--string-dim", type=int, default=64, help="hash bitmap width when no --dict")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("estimate", help="estimate cost and cardinality of plan files", formatter_class=fmt)
    common(sp)
    sp.add_argument("plans", nargs="*", help="plan files")
    sp.add_argument("--checkpoint", help="trained checkpoint")
    sp.add_argument("--dict", help="substring dictionary (overrides the path stored in the checkpoint)")
    sp.add_argument("--pool-capacity", type=int, default=4096, help="memory pool entries (0 disables)")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("evaluate", help="q-error metrics of model and baseline", formatter_class=fmt)
    common(sp)
    sp.add_argument("--checkpoint", help="trained checkpoint")
    sp.add_argument("--dict", help="substring dictionary (overrides the path stored in the checkpoint)")
    sp.add_argument("--metrics-out", help="write the metrics table (TSV) here")
    sp.add_argument("--raw-out", help="per-query errors file (default: next to --metrics-out)")
    sp.add_argument("--oracle", action="store_true", help="also score the labels against themselves")
    sp.add_argument("--no-baseline", action="store_true", help="skip the independence baseline")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, CatalogError, PlanError, FeatureError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"treecost: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ModelError, CheckpointError, NonFiniteError) as e:
        print(f"treecost: model error: {e}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
