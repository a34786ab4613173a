"""Batch experiment runner and bound calculator.

Config files are JSON. A simulate run sweeps an (K_a, Eb/N0) grid, decodes
`frames` independent frames per point over a worker pool, and appends one
CSV row per grid point. A line-oriented sidecar records per-frame progress
so interrupted runs resume without recomputation. Frame seeds mix
(master_seed, point_index, frame_index), so results are identical at any
worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bigamp import BigAmpOpts
from .bound import BoundConfig, required_ebn0
from .channel import frame_seed, mix64, simulate_frame
from .config import ConfigError, SkpConfig, preset
from .receiver import ReceiverOpts, decode_frame, evaluate_pupe

CSV_HEADER = "scheme,M,Ka,EbN0_dB,frames,user_errors,pupe,mean_trials_used,wall_seconds,master_seed,git_describe"

ENV_OUTPUT = "SKPURA_OUTPUT"
ENV_WORKERS = "SKPURA_WORKERS"


class ConfigFileError(ValueError):
    """Malformed experiment config; message names the offending field."""


@dataclass
class ExperimentConfig:
    scheme: str
    M: int
    ebn0_db: list
    k_a: list
    frames: int
    master_seed: int
    output: str
    workers: int = 1
    receiver: dict = field(default_factory=dict)
    custom: dict = None

    def skp_config(self, k_a: int, ebn0_db: float) -> SkpConfig:
        if self.custom is not None:
            return SkpConfig(M=self.M, K_a=k_a, ebn0_db=ebn0_db, **self.custom)
        row = {"row1": 1, "row2": 2, "row3": 3}[self.scheme]
        return preset(row, self.M, k_a, ebn0_db)

    def receiver_opts(self, seed: int) -> ReceiverOpts:
        r = dict(self.receiver)
        amp = BigAmpOpts(
            max_iter=r.pop("bigamp_max_iter", 100),
            tol=r.pop("bigamp_tol", 1e-6),
            damping=r.pop("damping", 0.7),
        )
        return ReceiverOpts(
            n_top=r.pop("n_top", 10),
            p_thr=r.pop("p_thr", 3),
            t_max=r.pop("t_max", 30),
            outer_iters=r.pop("outer_iters", 10),
            seed=seed,
            bigamp=amp,
        )


def _require(mapping, key, types, where):
    if key not in mapping:
        raise ConfigFileError(f"{where}: missing required field '{key}'")
    value = mapping[key]
    if not isinstance(value, types):
        raise ConfigFileError(f"{where}: field '{key}' has the wrong type")
    return value


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    where = path
    scheme = raw.get("scheme", "custom" if "custom" in raw else None)
    if scheme is None:
        raise ConfigFileError(f"{where}: missing required field 'scheme'")
    if scheme not in ("row1", "row2", "row3", "custom"):
        raise ConfigFileError(f"{where}: unknown scheme '{scheme}'")
    custom = None
    if scheme == "custom":
        custom = _require(raw, "custom", dict, where)
    ebn0 = _require(raw, "ebn0_db", list, where)
    k_a = _require(raw, "ka", list, where)
    if not ebn0 or not k_a:
        raise ConfigFileError(f"{where}: sweep lists must be nonempty")
    frames = _require(raw, "frames", int, where)
    if frames < 1:
        raise ConfigFileError(f"{where}: field 'frames' must be >= 1")
    cfg = ExperimentConfig(
        scheme=scheme,
        M=_require(raw, "M", int, where),
        ebn0_db=[float(x) for x in ebn0],
        k_a=[int(x) for x in k_a],
        frames=frames,
        master_seed=_require(raw, "master_seed", int, where),
        output=_require(raw, "output", str, where),
        workers=int(raw.get("workers", 1)),
        receiver=raw.get("receiver", {}),
        custom=custom,
    )
    # Validate every grid point eagerly so bad schemes fail before any write.
    for k in cfg.k_a:
        for e in cfg.ebn0_db:
            try:
                cfg.skp_config(k, e)
            except (ConfigError, TypeError) as exc:
                raise ConfigFileError(f"{where}: invalid code parameters ({exc})") from exc
    return cfg


def grid_points(cfg: ExperimentConfig):
    """(point_index, k_a, ebn0_db) in the frozen sweep order."""
    points = []
    idx = 0
    for k in cfg.k_a:
        for e in cfg.ebn0_db:
            points.append((idx, k, e))
            idx += 1
    return points


def run_one_frame(cfg: ExperimentConfig, point_index: int, k_a: int,
                  ebn0_db: float, frame_index: int):
    """Simulate and decode a single frame; the unit of parallel work."""
    t0 = time.perf_counter()
    skp = cfg.skp_config(k_a, ebn0_db)
    seed = frame_seed(cfg.master_seed, point_index, frame_index)
    truth = simulate_frame(skp, seed)
    opts = cfg.receiver_opts(seed=mix64(seed, 1))
    result = decode_frame(truth.Y, skp, opts)
    pupe = evaluate_pupe(truth.packets, result.packets)
    user_errors = int(round(pupe * k_a))
    return point_index, frame_index, user_errors, result.trials_used, time.perf_counter() - t0


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10, check=False,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _progress_path(output: str) -> str:
    return output + ".progress"


def read_progress(path: str):
    """Completed frames from the sidecar: {(point, frame): (errors, trials, wall)}."""
    done = {}
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            p, f = int(parts[0]), int(parts[1])
            done[(p, f)] = (int(parts[2]), int(parts[3]), float(parts[4]))
    return done


def run_experiment(cfg_path: str, workers: int = None, resume: bool = False):
    """Execute the sweep, stream per-point rows into the output CSV."""
    cfg = load_experiment_config(cfg_path)
    output = os.environ.get(ENV_OUTPUT, cfg.output)
    workers = workers if workers is not None else int(os.environ.get(ENV_WORKERS, cfg.workers))
    points = grid_points(cfg)
    progress_file = _progress_path(output)
    done = read_progress(progress_file) if resume else {}

    jobs = [
        (cfg, p, k, e, f)
        for (p, k, e) in points
        for f in range(cfg.frames)
        if (p, f) not in done
    ]

    results = dict(done)
    with open(progress_file, "a" if resume else "w") as prog:
        if workers > 1 and jobs:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(_run_frame_star, jobs, chunksize=1):
                    p, f, errs, trials, wall = rec
                    results[(p, f)] = (errs, trials, wall)
                    prog.write(f"{p},{f},{errs},{trials},{wall:.6f}\n")
                    prog.flush()
        else:
            for job in jobs:
                p, f, errs, trials, wall = run_one_frame(*job)
                results[(p, f)] = (errs, trials, wall)
                prog.write(f"{p},{f},{errs},{trials},{wall:.6f}\n")
                prog.flush()

    git = _git_describe()
    rows = []
    for (p, k, e) in points:
        per_frame = [results[(p, f)] for f in range(cfg.frames)]
        errors = sum(r[0] for r in per_frame)
        trials = float(np.mean([r[1] for r in per_frame]))
        wall = float(np.sum([r[2] for r in per_frame]))
        pupe = errors / (cfg.frames * k)
        rows.append(
            f"{cfg.scheme},{cfg.M},{k},{e:g},{cfg.frames},{errors},"
            f"{pupe!r},{trials!r},{wall:.3f},{cfg.master_seed},{git}"
        )
    with open(output, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    return output


def _run_frame_star(job):
    return run_one_frame(*job)


def load_bound_config(path: str):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    where = path
    ms = _require(raw, "M", list, where)
    kas = _require(raw, "ka", list, where)
    return {
        "M": [int(m) for m in ms],
        "ka": [int(k) for k in kas],
        "T_tot": int(raw.get("T_tot", 3200)),
        "B": int(raw.get("B", 96)),
        "eps": float(raw.get("eps", 0.1)),
        "realizations": int(raw.get("realizations", 100_000)),
        "ebn0_lo_db": float(raw.get("ebn0_lo_db", -30.0)),
        "ebn0_hi_db": float(raw.get("ebn0_hi_db", 40.0)),
        "tol_db": float(raw.get("tol_db", 0.05)),
        "seed": int(raw.get("seed", 0)),
        "output": _require(raw, "output", str, where),
    }


def run_bound(cfg_path: str):
    """Required Eb/N0 per (M, K_a) pair, written as a small CSV."""
    raw = load_bound_config(cfg_path)
    output = os.environ.get(ENV_OUTPUT, raw["output"])
    lines = ["M,Ka,required_EbN0_dB"]
    for m in raw["M"]:
        for k in raw["ka"]:
            bc = BoundConfig(
                M=m, K_a=k, T_tot=raw["T_tot"], B=raw["B"], eps=raw["eps"],
                realizations=raw["realizations"], ebn0_lo_db=raw["ebn0_lo_db"],
                ebn0_hi_db=raw["ebn0_hi_db"], tol_db=raw["tol_db"], seed=raw["seed"],
            )
            val = required_ebn0(bc)
            lines.append(f"{m},{k},{val!r}")
    with open(output, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="skpura", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a sweep from a JSON config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--resume", action="store_true")

    bnd = sub.add_parser("bound", help="compute required Eb/N0 bounds")
    bnd.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            out = run_experiment(args.config, workers=args.workers, resume=args.resume)
        else:
            out = run_bound(args.config)
    except (ConfigFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
