"""Pure reporting over experiment CSVs: aggregate tables and figures.

Raw rows stay the source of truth; this module only reads them back,
groups them, and renders summary files. Figures go to PNG next to the
delimited summary.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import ResultRow, read_rows_csv

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FIG_WIDTH = 6.4

SUMMARY_HEADER = ("protocol", "scheme", "param", "num_sources", "n", "mean_psnr", "mean_ssim")


@dataclass(frozen=True)
class SummaryRow:
    protocol: str
    scheme: str
    param: str
    num_sources: int
    n: int
    mean_psnr: float
    mean_ssim: float


def _scheme_label(scheme: str, param: str) -> str:
    return f"{scheme} ({param})" if param else scheme


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Group rows by (protocol, scheme, param, num_sources) and average."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.protocol, r.scheme, r.param, r.num_sources), []).append(r)
    out = []
    for key in sorted(groups):
        members = groups[key]
        out.append(
            SummaryRow(
                protocol=key[0],
                scheme=key[1],
                param=key[2],
                num_sources=key[3],
                n=len(members),
                mean_psnr=sum(m.psnr for m in members) / len(members),
                mean_ssim=sum(m.ssim for m in members) / len(members),
            )
        )
    return out


def write_summary_csv(path, summary: list[SummaryRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for s in summary:
            writer.writerow(
                [s.protocol, s.scheme, s.param, s.num_sources, s.n, f"{s.mean_psnr:.6f}", f"{s.mean_ssim:.6f}"]
            )


def _new_axes():
    fig, ax = plt.subplots(figsize=(_FIG_WIDTH, _FIG_WIDTH * _GOLDEN))
    ax.grid(True, axis="y", linestyle="--", alpha=0.6)
    return fig, ax


def sweep_figure(summary: list[SummaryRow], path) -> bool:
    """PSNR against the number of input views, one line per scheme."""
    sweep = [s for s in summary if s.protocol == "sweep"]
    if not sweep:
        return False
    fig, ax = _new_axes()
    labels = sorted({_scheme_label(s.scheme, s.param) for s in sweep})
    markers = ["s", "^", "x", "o", "d", "v"]
    for idx, label in enumerate(labels):
        pts = sorted(
            (s.num_sources, s.mean_psnr) for s in sweep if _scheme_label(s.scheme, s.param) == label
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=markers[idx % len(markers)], label=label)
    ax.set_xlabel("number of input views")
    ax.set_ylabel("PSNR (dB)")
    ax.set_xticks(sorted({s.num_sources for s in sweep}))
    ax.legend(loc="best")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return True


def protocol_figure(summary: list[SummaryRow], path) -> bool:
    """Mean PSNR per scheme, grouped by protocol (random vs. close)."""
    prot = [s for s in summary if s.protocol in ("random", "close")]
    if not prot:
        return False
    fig, ax = _new_axes()
    protocols = sorted({s.protocol for s in prot})
    labels = sorted({_scheme_label(s.scheme, s.param) for s in prot})
    width = 0.8 / max(len(labels), 1)
    for idx, label in enumerate(labels):
        vals = []
        for p in protocols:
            match = [s.mean_psnr for s in prot if s.protocol == p and _scheme_label(s.scheme, s.param) == label]
            vals.append(match[0] if match else float("nan"))
        xs = [i + idx * width for i in range(len(protocols))]
        ax.bar(xs, vals, width=width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(protocols))])
    ax.set_xticklabels(protocols)
    ax.set_ylabel("mean PSNR (dB)")
    ax.legend(loc="best")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return True


def loss_curve_figure(loss_csv_path, path) -> bool:
    """Training-loss curve from a train-caw loss CSV (epoch, mean_loss)."""
    epochs, losses = [], []
    with open(loss_csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            epochs.append(int(rec[0]))
            losses.append(float(rec[1]))
    if not epochs:
        return False
    fig, ax = _new_axes()
    ax.plot(epochs, losses, marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.set_yscale("log")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return True


def generate_report(csv_paths, out_dir, loss_csv=None) -> list[str]:
    """Aggregate one or more experiment CSVs into a summary table + figures.

    Returns the list of files written.
    """
    rows: list[ResultRow] = []
    for p in csv_paths:
        rows.extend(read_rows_csv(p))
    os.makedirs(out_dir, exist_ok=True)
    summary = summarize(rows)
    written = []

    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary_path, summary)
    written.append(summary_path)

    sweep_path = os.path.join(out_dir, "view_sweep.png")
    if sweep_figure(summary, sweep_path):
        written.append(sweep_path)
    protocol_path = os.path.join(out_dir, "protocol_comparison.png")
    if protocol_figure(summary, protocol_path):
        written.append(protocol_path)
    if loss_csv is not None:
        loss_path = os.path.join(out_dir, "loss_curve.png")
        if loss_curve_figure(loss_csv, loss_path):
            written.append(loss_path)
    return written
