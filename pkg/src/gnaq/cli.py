"""Command-line entry point: prepare, train-fp, train-gnaq, eval, inspect."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import TrainConfig
from .data import dataset_stats, load_split, parse_interactions, split_train_test, write_split
from .errors import GnaqError, InputError, NumericError
from .fp_model import train_fp
from .graph import propagate
from .metrics import evaluate
from .model_io import (compression_ratio, fp8_round_model, load_model, read_header, save_model)
from .qat import quantized_output, train_gnaq
from .quant import QuantizedModel, boundaries

log = logging.getLogger("gnaq")

EXIT_INPUT = 2
EXIT_NUMERIC = 3
CLI_KEYS = ("data", "out", "init")

# flag dest -> TrainConfig field
OVERRIDES = {
    "epochs": "epochs", "dim": "dim", "layers": "layers", "lr": "lr", "reg": "reg",
    "batch_size": "batch_size", "seed": "seed", "n_bits": "n_bits", "list_len": "list_len",
}


def _load_config(args) -> tuple[TrainConfig, dict]:
    raw = {}
    if getattr(args, "config", None):
        p = Path(args.config)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {p}: {e}") from e
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
    extra = {k: raw.pop(k) for k in CLI_KEYS if k in raw}
    for dest, name in OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            raw[name] = v
    for flag, name in (("no_dqs", "use_dqs"), ("no_rau", "use_rau"), ("no_rank_loss", "use_rank_loss")):
        if getattr(args, flag, False):
            raw[name] = False
    return TrainConfig.from_dict(raw), extra


def _pick(args, extra, name, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return extra.get(name, default)


def _parse_ks(text: str) -> tuple:
    try:
        ks = tuple(int(k) for k in text.split(",") if k.strip())
    except ValueError:
        raise InputError(f"bad K list {text!r}") from None
    if not ks or min(ks) < 1:
        raise InputError(f"bad K list {text!r}")
    return ks


def cmd_prepare(args) -> int:
    edges, users, items = parse_interactions(args.input, args.format)
    ds = split_train_test(edges, args.holdout, args.seed, len(users), len(items), users, items)
    write_split(ds, args.out)
    s = dataset_stats(ds)
    print(f"users={s['users']}\titems={s['items']}\tinteractions={s['interactions']}\tsparsity={s['sparsity']:.6g}")
    return 0


def _write_log(path: Path, lines) -> None:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def cmd_train_fp(args) -> int:
    cfg, extra = _load_config(args)
    data = _pick(args, extra, "data")
    if data is None:
        raise InputError("--data is required")
    out = Path(_pick(args, extra, "out", "fp.gnaq"))
    ds = load_split(data)
    res = train_fp(ds, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(res.table, out)
    _write_log(out.with_suffix(".log"), res.log)
    rep = evaluate(propagate(ds.graph_train, res.table, cfg.layers).averaged, ds, cfg.eval_ks)
    print(f"best epoch: {res.best_epoch}")
    print(rep.text())
    return 0


def cmd_train_gnaq(args) -> int:
    cfg, extra = _load_config(args)
    data = _pick(args, extra, "data")
    init = _pick(args, extra, "init")
    if data is None or init is None:
        raise InputError("--data and --init are required")
    out = Path(_pick(args, extra, "out", "q.gnaq"))
    ds = load_split(data)
    pre = load_model(init)
    if isinstance(pre, QuantizedModel):
        raise InputError(f"{init} is a quantized model; --init needs a full-precision checkpoint")
    if pre.shape[1] != cfg.dim:
        raise InputError(f"init dimension {pre.shape[1]} != config dim {cfg.dim}")
    res = train_gnaq(ds, pre, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(res.model, out)
    _write_log(out.with_suffix(".log"), res.log)
    print(f"best epoch: {res.best_epoch}")
    for label, m in (("full-precision scales", res.model), ("fp8 scales", fp8_round_model(res.model))):
        rep = evaluate(quantized_output(ds.graph_train, m, cfg.layers), ds, cfg.eval_ks)
        print(f"[{label}]")
        print(rep.text())
    return 0


def cmd_eval(args) -> int:
    ds = load_split(args.data)
    ks = _parse_ks(args.k)
    model = load_model(args.model)
    if isinstance(model, QuantizedModel):
        if model.n_nodes != ds.graph_train.n_nodes:
            raise InputError(f"model has {model.n_nodes} nodes, dataset {ds.graph_train.n_nodes}")
        h = quantized_output(ds.graph_train, model, args.layers)
    else:
        if model.shape[0] != ds.graph_train.n_nodes:
            raise InputError(f"model has {model.shape[0]} nodes, dataset {ds.graph_train.n_nodes}")
        h = propagate(ds.graph_train, model, args.layers).averaged
    rep = evaluate(h, ds, ks)
    out = Path(args.out) if args.out else Path(args.model).with_suffix(".eval.json")
    out.write_text(rep.dumps() + "\n", encoding="utf-8")
    print(rep.text())
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.model)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    h = read_header(path.read_bytes())
    model = load_model(path)
    size = path.stat().st_size
    print(f"kind: {'quantized' if h.quantized else 'full-precision'}")
    print(f"version: {h.version}")
    print(f"nodes: {h.n_nodes}")
    print(f"dim: {h.dim}")
    print(f"bits: {h.n_bits if h.quantized else 32}")
    print(f"size_on_disk: {size}")
    print(f"payload_bytes: {h.payload_size}")
    if h.quantized:
        steps = np.diff(boundaries(model), axis=1)
        q = np.percentile(steps, [0, 25, 50, 75, 100])
        print("step_size: min={:.4g} q25={:.4g} median={:.4g} q75={:.4g} max={:.4g}".format(*q))
        counts, edges = np.histogram(steps, bins=8)
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            print(f"  [{lo:.4g}, {hi:.4g}): {c}")
        ratio = compression_ratio(h.dim, h.n_bits)
    else:
        ratio = 1.0
    print(f"compression_ratio: {ratio:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gnaq", description=__doc__)
    p.add_argument("--threads", type=int, default=None,
                   help="cap on BLAS/worker threads (env GNAQ_THREADS; default: all processors)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="parse an interaction file and write a train/test split")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=["triplet", "adjlist"], default="triplet")
    s.add_argument("--holdout", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_prepare)

    def training_flags(s):
        s.add_argument("--data")
        s.add_argument("--config")
        s.add_argument("--out")
        s.add_argument("--epochs", type=int)
        s.add_argument("--dim", type=int)
        s.add_argument("--layers", type=int)
        s.add_argument("--lr", type=float)
        s.add_argument("--reg", type=float)
        s.add_argument("--batch-size", dest="batch_size", type=int)
        s.add_argument("--list-len", dest="list_len", type=int)
        s.add_argument("--seed", type=int)

    s = sub.add_parser("train-fp", help="full-precision pre-training")
    training_flags(s)
    s.set_defaults(func=cmd_train_fp)

    s = sub.add_parser("train-gnaq", help="quantization-aware training from a full-precision checkpoint")
    training_flags(s)
    s.add_argument("--init")
    s.add_argument("--n-bits", dest="n_bits", type=int)
    s.add_argument("--no-dqs", action="store_true", help="keep the initial uniform step sizes")
    s.add_argument("--no-rau", action="store_true", help="freeze quantization codes")
    s.add_argument("--no-rank-loss", action="store_true", help="BPR loss only")
    s.set_defaults(func=cmd_train_gnaq)

    s = sub.add_parser("eval", help="Recall@K / NDCG@K of a model file on the test split")
    s.add_argument("--data", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--k", default="10,20")
    s.add_argument("--layers", type=int, default=3)
    s.add_argument("--out", help="JSON report path (default: <model>.eval.json)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("inspect", help="print header, step-size summary and compression ratio")
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or int(os.environ.get("GNAQ_THREADS", "0") or 0) or os.cpu_count()
    try:
        with threadpool_limits(limits=threads):
            return args.func(args)
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GnaqError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
