"""Artifact writers: CSV and JSON with a stable, re-runnable format.

CSV dialect: comma separator, '.' decimal point, one header row, LF line
endings, floats printed with 17 significant digits so values round-trip
exactly. JSON encodes non-finite floats as the strings "inf", "-inf",
"nan" (plain JSON has no spelling for them).
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


def json_ready(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats
    into JSON-encodable values."""
    if isinstance(obj, dict):
        return {key: json_ready(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(val) for val in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(json_ready(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path, header, columns) -> None:
    """Write equal-length columns under the given header names."""
    columns = [np.asarray(col) for col in columns]
    lengths = {col.shape[0] for col in columns}
    if len(lengths) > 1:
        raise ValueError(f"column lengths differ: {sorted(lengths)}")
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(fmt(value) for value in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_eta_curve_csv(path, curve) -> None:
    write_csv(path, ["p", "eta"], [curve.grid, curve.values])


def write_regime_report_json(path, report) -> None:
    write_json(path, report.to_dict())


def write_paths_csv(path, samples) -> None:
    """Dump paths as rows (t, x, y, path_id), each path in time order.

    The state column holds the state in force from time t onward (the
    post-jump state at jump rows).
    """
    t_col, x_col, y_col, id_col = [], [], [], []
    for sample in samples:
        jump_set = {float(t) for t in sample.jump_times}
        state_at = {}
        for state, t in zip(sample.states[1:], sample.jump_times):
            state_at[float(t)] = int(state)
        current = int(sample.states[0])
        for t in sorted(sample.y_at):
            if t in jump_set:
                current = state_at[t]
            t_col.append(t)
            x_col.append(current)
            y_col.append(sample.y_at[t])
            id_col.append(sample.path_index)
    write_csv(path, ["t", "x", "y", "path_id"], [t_col, x_col, y_col, id_col])


def write_subchain_csv(path, subchain) -> None:
    n = np.arange(subchain.entry_times.size)
    write_csv(
        path,
        ["n", "T_2n", "u_n", "v_n"],
        [n, subchain.entry_times, subchain.u, subchain.v],
    )


def write_decay_csv(path, experiment) -> None:
    with np.errstate(divide="ignore"):
        log_w = np.log(experiment.values)
    write_csv(path, ["t", "w_p", "log_w_p"], [experiment.times, experiment.values, log_w])


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command, parameters, model_path=None, seed=None) -> None:
    """Record everything needed to re-run a command bit-identically."""
    from . import __version__

    payload = {
        "command": command,
        "package": "switchou",
        "version": __version__,
        "seed": seed,
        "parameters": parameters,
    }
    if model_path is not None:
        payload["model_path"] = str(model_path)
        payload["model_sha256"] = file_sha256(model_path)
    write_json(Path(out_dir) / "manifest.json", payload)
