"""Figure rendering: required-Eb/N0 vs K_a and PUPE vs Eb/N0 curves."""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .extract import SweepRow, Threshold, extract_required_ebn0, read_bound_csv, read_sweep_csv


@dataclass
class CurveSpec:
    csv_paths: list
    eps: float
    out_dir: str
    bound_csv: str = None


def render(spec: CurveSpec) -> dict:
    """Write the figures and a machine-readable JSON of the plotted points.

    Returns the sidecar dictionary (also written to threshold_points.json).
    """
    rows: list[SweepRow] = []
    for path in spec.csv_paths:
        rows.extend(read_sweep_csv(path))
    os.makedirs(spec.out_dir, exist_ok=True)

    thresholds = extract_required_ebn0(rows, spec.eps) if rows else []
    plotted = [t for t in thresholds if t.flag == "ok"]
    flagged = [t for t in thresholds if t.flag != "ok"]
    for t in flagged:
        warnings.warn(
            f"group scheme={t.scheme} M={t.m} Ka={t.ka}: {t.flag}; not plotted")

    # Required Eb/N0 vs number of active users, one curve per (scheme, M).
    fig, ax = plt.subplots(figsize=(6, 4.5))
    series: dict[tuple, list[Threshold]] = {}
    for t in plotted:
        series.setdefault((t.scheme, t.m), []).append(t)
    for (scheme, m), pts in sorted(series.items()):
        pts = sorted(pts, key=lambda t: t.ka)
        ax.plot([p.ka for p in pts], [p.ebn0_db for p in pts],
                marker="o", label=f"{scheme}, M={m}")
    if spec.bound_csv:
        bound_pts = read_bound_csv(spec.bound_csv)
        by_m: dict[int, list] = {}
        for m, ka, val in bound_pts:
            by_m.setdefault(m, []).append((ka, val))
        for m, pts in sorted(by_m.items()):
            pts.sort()
            ax.plot([k for k, _ in pts], [v for _, v in pts],
                    linestyle="--", label=f"limit, M={m}")
    if not series and not spec.bound_csv:
        warnings.warn("no plottable groups; writing an empty figure")
    ax.set_xlabel("active users")
    ax.set_ylabel(f"required Eb/N0 [dB] at PUPE {spec.eps:g}")
    ax.grid(True, alpha=0.4)
    if series or spec.bound_csv:
        ax.legend()
    fig.tight_layout()
    threshold_png = os.path.join(spec.out_dir, "required_ebn0_vs_ka.png")
    fig.savefig(threshold_png, dpi=120)
    plt.close(fig)

    # Raw PUPE vs Eb/N0, one curve per (scheme, M, Ka).
    fig, ax = plt.subplots(figsize=(6, 4.5))
    curves: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        curves.setdefault((r.scheme, r.m, r.ka), []).append(r)
    for (scheme, m, ka), pts in sorted(curves.items()):
        pts = sorted(pts, key=lambda r: r.ebn0_db)
        ax.semilogy([p.ebn0_db for p in pts],
                    [max(p.pupe, 1e-6) for p in pts],
                    marker="s", label=f"{scheme}, M={m}, Ka={ka}")
    ax.axhline(spec.eps, color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("Eb/N0 [dB]")
    ax.set_ylabel("PUPE")
    ax.grid(True, which="both", alpha=0.4)
    if curves:
        ax.legend(fontsize=8)
    fig.tight_layout()
    pupe_png = os.path.join(spec.out_dir, "pupe_vs_ebn0.png")
    fig.savefig(pupe_png, dpi=120)
    plt.close(fig)

    sidecar = {
        "eps": spec.eps,
        "points": [
            {"scheme": t.scheme, "M": t.m, "Ka": t.ka, "required_EbN0_dB": t.ebn0_db}
            for t in plotted
        ],
        "flagged": [
            {"scheme": t.scheme, "M": t.m, "Ka": t.ka, "flag": t.flag}
            for t in flagged
        ],
        "figures": [threshold_png, pupe_png],
    }
    with open(os.path.join(spec.out_dir, "threshold_points.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return sidecar
