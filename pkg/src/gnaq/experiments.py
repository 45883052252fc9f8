"""Desk-scale end-to-end pipeline driven through the CLI entry point."""
from __future__ import annotations

import contextlib
import io
import json
from pathlib import Path

from .cli import main
from .data import write_interactions
from .synthetic import block_graph

DESK_CONFIG = {"dim": 32, "layers": 3, "epochs": 150, "batch_size": 1024, "seed": 2024}
DESK_GNAQ_EPOCHS = 50
ABLATIONS = {"gnaq": [], "no_dqs": ["--no-dqs"], "no_rau": ["--no-rau"], "no_rank_loss": ["--no-rank-loss"]}


def _run(argv) -> str:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    if code != 0:
        raise RuntimeError(f"gnaq {' '.join(argv)} exited with {code}")
    return buf.getvalue()


def desk_pipeline(workdir, ablations=("gnaq", "no_dqs", "no_rau"), seed: int = 7) -> dict:
    """Synthetic block graph -> prepare -> train-fp -> train-gnaq (+ ablations) -> eval.

    Returns ``{run_name: eval report dict}`` with ``"fp"`` for the full-precision model.
    """
    wd = Path(workdir)
    wd.mkdir(parents=True, exist_ok=True)
    write_interactions(wd / "interactions.txt", block_graph(seed=seed))
    _run(["prepare", "--input", str(wd / "interactions.txt"), "--out", str(wd / "data"), "--seed", "0"])
    (wd / "config.json").write_text(json.dumps(DESK_CONFIG))
    common = ["--data", str(wd / "data"), "--config", str(wd / "config.json")]
    _run(["train-fp", *common, "--out", str(wd / "fp.gnaq")])
    reports = {}
    _run(["eval", "--data", str(wd / "data"), "--model", str(wd / "fp.gnaq"), "--out", str(wd / "fp.json")])
    reports["fp"] = json.loads((wd / "fp.json").read_text())
    for name in ablations:
        out = wd / f"{name}.gnaq"
        _run(["train-gnaq", *common, "--init", str(wd / "fp.gnaq"), "--out", str(out),
              "--epochs", str(DESK_GNAQ_EPOCHS), *ABLATIONS[name]])
        _run(["eval", "--data", str(wd / "data"), "--model", str(out), "--out", str(wd / f"{name}.json")])
        reports[name] = json.loads((wd / f"{name}.json").read_text())
    return reports
