"""Repeat the desk-scale comparison over several training seeds (in-memory, no files).

    python scripts/seed_sweep.py 1 2 3 4 5
"""
import sys

from gnaq.config import TrainConfig
from gnaq.data import split_train_test
from gnaq.fp_model import train_fp
from gnaq.graph import propagate
from gnaq.metrics import evaluate
from gnaq.qat import quantized_output, train_gnaq
from gnaq.synthetic import block_graph

RUNS = {"gnaq": {}, "no_dqs": {"use_dqs": False}, "no_rau": {"use_rau": False}, "no_rank": {"use_rank_loss": False}}

if __name__ == "__main__":
    seeds = [int(s) for s in sys.argv[1:]] or [2024, 1, 2, 3, 4, 5]
    ds = split_train_test(block_graph(), 0.2, 0, 200, 300)
    print("seed\t" + "\t".join(f"{k}_R@20" for k in ["fp", *RUNS]))
    for seed in seeds:
        cfg = TrainConfig(dim=32, layers=3, epochs=150, batch_size=1024, seed=seed)
        fp = train_fp(ds, cfg).table
        row = [evaluate(propagate(ds.graph_train, fp, 3).averaged, ds).recall[20]]
        for kw in RUNS.values():
            q = train_gnaq(ds, fp, cfg.replace(epochs=50, **kw)).model
            row.append(evaluate(quantized_output(ds.graph_train, q, 3), ds).recall[20])
        print(f"{seed}\t" + "\t".join(f"{v:.4f}" for v in row), flush=True)
