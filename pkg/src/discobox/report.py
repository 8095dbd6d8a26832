"""Report rendering: machine-readable JSON, delimited CSV and
matplotlib figures written next to each other."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SCHEMA_VERSION = 1


def write_json(path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def write_eval_report(report_path, result: dict) -> None:
    """Write AP results as JSON plus a CSV table and a bar figure with
    the same stem."""
    report_path = Path(report_path)
    ap = result["ap"]
    payload = {
        "ap": {f"{a * 100:g}": v for a, v in ap.items()},
        "ap_percent": {f"{a * 100:g}": f"{v * 100:.1f}" for a, v in ap.items()},
        "mean_ap": result["mean_ap"],
        "mean_ap_percent": f"{result['mean_ap'] * 100:.1f}",
        "warning_empty": result["warning_empty"],
    }
    write_json(report_path, payload)

    csv_path = report_path.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["alpha_percent", "ap"])
        for a, v in ap.items():
            writer.writerow([f"{a * 100:g}", f"{v:.12g}"])
        writer.writerow(["mean", f"{result['mean_ap']:.12g}"])

    fig, axis = plt.subplots(figsize=(5, 3.2))
    labels = [f"{a * 100:g}%" for a in ap]
    axis.bar(labels, [v * 100 for v in ap.values()], color="#3b76af")
    axis.axhline(result["mean_ap"] * 100, color="#b23434", ls="--", lw=1,
                 label=f"mean {result['mean_ap'] * 100:.1f}")
    axis.set_xlabel("distance threshold (fraction of box diagonal)")
    axis.set_ylabel("AP (%)")
    axis.set_ylim(0, 105)
    axis.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(report_path.with_suffix(".png"), dpi=120)
    plt.close(fig)


def write_bench_report(out_path, rows: list[dict]) -> None:
    """Timing rows -> CSV plus a bar figure."""
    out_path = Path(out_path)
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["operation", "seconds", "per_call_ms"])
        for r in rows:
            writer.writerow([r["operation"], f"{r['seconds']:.6f}", f"{r['per_call_ms']:.3f}"])

    fig, axis = plt.subplots(figsize=(5, 3.2))
    axis.bar([r["operation"] for r in rows], [r["per_call_ms"] for r in rows], color="#4a8f5d")
    axis.set_ylabel("per call (ms)")
    axis.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(out_path.with_suffix(".png"), dpi=120)
    plt.close(fig)
