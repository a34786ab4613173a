"""Read sweep CSVs and extract required-Eb/N0 thresholds.

Consumes the harness schema verbatim:
scheme,M,Ka,EbN0_dB,frames,user_errors,pupe,mean_trials_used,wall_seconds,master_seed,git_describe
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

EXPECTED_HEADER = [
    "scheme", "M", "Ka", "EbN0_dB", "frames", "user_errors", "pupe",
    "mean_trials_used", "wall_seconds", "master_seed", "git_describe",
]

BOUND_HEADER = ["M", "Ka", "required_EbN0_dB"]


@dataclass
class SweepRow:
    scheme: str
    m: int
    ka: int
    ebn0_db: float
    pupe: float


@dataclass
class Threshold:
    scheme: str
    m: int
    ka: int
    ebn0_db: float = None
    flag: str = "ok"       # "ok", "below grid", "above grid", "no straddle"


def read_sweep_csv(path: str) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EXPECTED_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = []
        for rec in reader:
            rows.append(SweepRow(
                scheme=rec[0], m=int(rec[1]), ka=int(rec[2]),
                ebn0_db=float(rec[3]), pupe=float(rec[6]),
            ))
    return rows


def read_bound_csv(path: str) -> list[tuple[int, int, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != BOUND_HEADER:
            raise ValueError(f"{path}: unexpected bound header {header!r}")
        return [(int(r[0]), int(r[1]), float(r[2])) for r in reader]


def interpolate_crossing(points: list[tuple[float, float]], eps: float):
    """Linear interpolation in dB of the pupe = eps crossing.

    points -- (ebn0_db, pupe) pairs; an exact grid hit returns that point.
    Returns (value, flag).
    """
    pts = sorted(points)
    for x, p in pts:
        if p == eps:
            return x, "ok"
    for (x1, p1), (x2, p2) in zip(pts, pts[1:]):
        if p1 > eps > p2:
            return x1 + (x2 - x1) * (p1 - eps) / (p1 - p2), "ok"
    if all(p < eps for _, p in pts):
        return None, "below grid"
    if all(p > eps for _, p in pts):
        return None, "above grid"
    return None, "no straddle"


def extract_required_ebn0(rows: list[SweepRow], eps: float) -> list[Threshold]:
    """Threshold per (scheme, M, Ka) group; groups without a clean crossing
    are flagged and excluded from plotting."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if not rows:
        raise ValueError("no input rows")
    groups: dict[tuple, list[tuple[float, float]]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.m, r.ka), []).append((r.ebn0_db, r.pupe))
    out = []
    for (scheme, m, ka), pts in sorted(groups.items()):
        val, flag = interpolate_crossing(pts, eps)
        out.append(Threshold(scheme=scheme, m=m, ka=ka, ebn0_db=val, flag=flag))
    return out
