import hashlib
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from utils.environment.engagement_env import TRACE_COLUMNS

logger = logging.getLogger(__name__)

SCATTER_COLUMNS = ["episode", "downrange", "crossrange", "miss"]
DISPERSION_COLUMNS = ["episode", "target_x", "target_y", "radial"]
HISTOGRAM_BINS = 20


# Vehicle position relative to the target it was chasing at each row; a direct hit ends at (0, 0, 0)
def relative_positions(trace):
    return pd.DataFrame({
        "t": trace["t"],
        "dx": trace["x"] - trace["x_T"],
        "dy": trace["y"] - trace["y_T"],
        "dz": trace["z"] - trace["z_T"],
        "event": trace["event"],
    })


def scatter_table(records):
    return records[SCATTER_COLUMNS].copy()


def dispersion_table(records):
    table = records[["episode", "target_x", "target_y"]].copy()
    table["radial"] = np.hypot(table["target_x"], table["target_y"])
    return table[DISPERSION_COLUMNS]


# Long-format histogram: quantity, bin edges, count
def histogram_table(records, columns=("time_of_flight", "terminal_speed"), bins=HISTOGRAM_BINS):
    frames = []
    for column in columns:
        values = records[column].dropna().to_numpy(dtype=float)
        if values.size == 0:
            continue
        counts, edges = np.histogram(values, bins=bins)
        frames.append(pd.DataFrame({"quantity": column, "bin_left": edges[:-1], "bin_right": edges[1:], "count": counts}))
    if not frames:
        return pd.DataFrame(columns=["quantity", "bin_left", "bin_right", "count"])
    return pd.concat(frames, ignore_index=True)


def export_trajectories(traces, out_dir):
    out_dir = Path(out_dir)
    written = []
    for episode, trace in sorted(traces.items()):
        path = out_dir / "trajectories" / f"episode_{episode:05d}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        trace[TRACE_COLUMNS].to_csv(path, index=False)
        written.append(path)
        rel_path = out_dir / "relative_positions" / f"episode_{episode:05d}.csv"
        rel_path.parent.mkdir(parents=True, exist_ok=True)
        relative_positions(trace).to_csv(rel_path, index=False)
        written.append(rel_path)
    return written


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_case_outputs(result, out_dir):
    logger.debug("write_case_outputs() called with out_dir: %s", out_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = result.summary
    tables = {
        "summary.csv": pd.DataFrame([summary.performance_row()]),
        "constraints.csv": summary.constraint_table(),
        "records.csv": result.records,
        "scatter.csv": scatter_table(result.records),
        "target_dispersion.csv": dispersion_table(result.records),
        "histograms.csv": histogram_table(result.records),
    }
    written = []
    for name, table in tables.items():
        path = out_dir / name
        table.to_csv(path, index=False)
        written.append(path)
    summary_json = out_dir / "summary.json"
    summary_json.write_text(json.dumps(summary.to_dict(), indent=2, default=_json_default))
    written.append(summary_json)
    written += export_trajectories(result.traces, out_dir)
    return written


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# manifest.json: every artifact under out_dir with its content hash
def write_manifest(out_dir, paths):
    out_dir = Path(out_dir).resolve()
    entries = []
    for path in sorted({Path(p).resolve() for p in paths}):
        entries.append({"path": path.relative_to(out_dir).as_posix(), "sha256": sha256_file(path), "bytes": path.stat().st_size})
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps({"artifacts": entries}, indent=2))
    return manifest
