"""Render training traces into figures and a flat CSV table.

Reads the line-delimited trace and writes per-epoch threshold, loss, score,
and reward curves as PNGs, next to a report.csv holding the same numbers for
external tooling.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .trace import read_trace


def _tree_key(tree):
    return f"l{tree['layer']}_r{tree['relation']}"


def _series(epochs, field):
    return [[t[field] for t in rec["trees"]] for rec in epochs]


def render_report(trace_path, out_dir):
    """Write thresholds/losses/val-AUC/reward figures plus report.csv.

    Returns the list of written paths."""
    records = read_trace(trace_path)
    epochs = [r for r in records if not r.get("final")]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if not epochs:
        return written

    xs = [r["epoch"] for r in epochs]
    keys = [_tree_key(t) for t in epochs[0]["trees"]]

    def _save_lines(name, per_tree, ylabel):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, key in enumerate(keys):
            ax.plot(xs, [row[i] for row in per_tree], label=key)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / name
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    _save_lines("thresholds.png", _series(epochs, "threshold"), "filtering threshold")
    _save_lines("rewards.png", _series(epochs, "reward"), "search reward")
    _save_lines("states.png", _series(epochs, "state"), "mean retained distance")

    fig, ax = plt.subplots(figsize=(7, 4))
    for field, label in (("loss_gnn", "classification"),
                         ("loss_sim", "similarity"),
                         ("loss_total", "total")):
        ys = [r[field] for r in epochs]
        if any(y is not None for y in ys):
            ax.plot(xs, ys, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    loss_path = out / "losses.png"
    fig.savefig(loss_path, dpi=120)
    plt.close(fig)
    written.append(loss_path)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, [r["val_auc"] for r in epochs], color="tab:green")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation AUC")
    fig.tight_layout()
    auc_path = out / "val_auc.png"
    fig.savefig(auc_path, dpi=120)
    plt.close(fig)
    written.append(auc_path)

    csv_path = out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["epoch", "loss_gnn", "loss_sim", "loss_total", "val_auc"]
        for key in keys:
            header += [f"{key}_threshold", f"{key}_depth", f"{key}_state",
                       f"{key}_reward"]
        writer.writerow(header)
        for rec in epochs:
            row = [rec["epoch"], rec["loss_gnn"], rec["loss_sim"],
                   rec["loss_total"], rec["val_auc"]]
            for t in rec["trees"]:
                row += [t["threshold"], t["depth"], t["state"], t["reward"]]
            writer.writerow(row)
    written.append(csv_path)
    return written
