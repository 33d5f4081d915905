"""Training-curve figures and tables from a run directory.

Reads only ``manifest.json`` and the per-round ``training.json`` and
``test.json`` files, so deleting the outputs and plotting again is lossless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .environment import TestRecord
from .report import label_round

CURVE_FIELDS = ["episode", "cost_mean", "cost_min", "cost_max", "vvr_mean", "vvr_min", "vvr_max"]


def collect(run_dir: Path) -> tuple[dict[int, dict[int, dict]], dict[int, dict[int, TestRecord]], int]:
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    threshold = int(manifest.get("config", {}).get("rl2", {}).get("threshold", 10))
    training: dict[int, dict[int, dict]] = {}
    tests: dict[int, dict[int, TestRecord]] = {}
    seed_dirs = sorted(run_dir.glob("seed_*"), key=lambda p: int(p.name.split("_", 1)[1]))
    for sdir in seed_dirs:
        seed = int(sdir.name.split("_", 1)[1])
        for rdir in sorted(sdir.glob("round_*")):
            k = int(rdir.name.split("_", 1)[1])
            tj, sj = rdir / "training.json", rdir / "test.json"
            if tj.exists():
                training.setdefault(k, {})[seed] = json.loads(tj.read_text(encoding="utf-8"))
            if sj.exists():
                tests.setdefault(k, {})[seed] = TestRecord.from_dict(json.loads(sj.read_text(encoding="utf-8")))
    return training, tests, threshold


def curve_rows(per_seed: dict[int, dict]) -> list[dict]:
    costs = np.array([d["episode_costs"] for d in per_seed.values()])
    vvr = np.array([d["episode_vvr"] for d in per_seed.values()])
    rows = []
    for ep in range(costs.shape[1]):
        rows.append(
            {
                "episode": ep,
                "cost_mean": costs[:, ep].mean(),
                "cost_min": costs[:, ep].min(),
                "cost_max": costs[:, ep].max(),
                "vvr_mean": vvr[:, ep].mean(),
                "vvr_min": vvr[:, ep].min(),
                "vvr_max": vvr[:, ep].max(),
            }
        )
    return rows


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in r.items()})


def plot_run(run_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .orchestrator import TABLE_FIELDS, aggregate_seeds

    plt.rcParams["svg.hashsalt"] = "rl2adn"
    training, tests, threshold = collect(run_dir)
    if not training:
        raise FileNotFoundError(f"no training.json files under {run_dir}")
    written: list[Path] = []

    fig, (ax_c, ax_v) = plt.subplots(1, 2, figsize=(11, 4))
    for k in sorted(training):
        rows = curve_rows(training[k])
        path = run_dir / f"curves_round_{k:02d}.csv"
        _write_csv(path, CURVE_FIELDS, rows)
        written.append(path)
        ep = np.array([r["episode"] for r in rows])
        for ax, key in ((ax_c, "cost"), (ax_v, "vvr")):
            mean = np.array([r[f"{key}_mean"] for r in rows])
            lo = np.array([r[f"{key}_min"] for r in rows])
            hi = np.array([r[f"{key}_max"] for r in rows])
            (line,) = ax.plot(ep, mean, lw=1.2, label=f"round {k}")
            ax.fill_between(ep, lo, hi, color=line.get_color(), alpha=0.2, lw=0)
    ax_c.set_xlabel("training episode")
    ax_c.set_ylabel("operating cost per episode")
    ax_v.set_xlabel("training episode")
    ax_v.set_ylabel("step-average VVR")
    ax_v.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    svg = run_dir / "training_curves.svg"
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    written.append(svg)

    if tests:
        per_seed: dict[int, list] = {}
        for k in sorted(tests):
            for seed, rec in tests[k].items():
                per_seed.setdefault(seed, []).append(
                    SimpleNamespace(test=rec, label=label_round(rec, threshold))
                )
        table = run_dir / "table3.csv"
        rows = aggregate_seeds(per_seed)
        _write_csv(table, TABLE_FIELDS, rows)
        written.append(table)
    return written
