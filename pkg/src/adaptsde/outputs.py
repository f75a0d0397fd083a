"""File formats: binary sample matrix, NDJSON step trace, CSV tables, report."""

from __future__ import annotations

import csv
import json
import struct

import numpy as np
import yaml

MAGIC = b"ADSM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

RESULT_COLUMNS = ("method", "eps_rel", "nfe", "w2", "sliced_w2", "accepted",
                  "rejected", "wall_time")
STABILITY_COLUMNS = ("lam", "h", "analytic_m2", "empirical_m2", "ci", "stable", "diverged")


def fmt(v) -> str:
    """Round-trip exact text for numbers; 17 significant digits for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def write_samples(path, x) -> None:
    """Header (magic, u32 version, u64 n, u64 d) then float64 row-major, little-endian."""
    x = np.ascontiguousarray(np.atleast_2d(x), dtype="<f8")
    n, d = x.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d))
        fh.write(x.tobytes(order="C"))


def read_samples(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated sample file")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a sample matrix file")
    if version != VERSION:
        raise ValueError(f"unsupported sample file version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * d:
        raise ValueError("sample file size does not match its header")
    return np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64)


def write_trace(path, log) -> None:
    """One JSON object per attempted step, grouped by sample in chronological order."""
    log = log.sorted()
    with open(path, "w") as fh:
        for i, t, h, e, a in zip(log.sample_id, log.t, log.h, log.error, log.accepted):
            # floats go through fmt so the text is identical to the CSV digits
            fh.write('{"sample_id": %d, "t": %s, "h": %s, "E": %s, "accepted": %s}\n'
                     % (i, _json_num(t), _json_num(h), _json_num(e), "true" if a else "false"))


def _json_num(v):
    v = float(v)
    if not np.isfinite(v):
        return json.dumps(None)
    return fmt(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class _Dumper(yaml.SafeDumper):
    pass


def _float_repr(dumper, v):
    if v != v:
        text = ".nan"
    elif v in (float("inf"), float("-inf")):
        text = ".inf" if v > 0 else "-.inf"
    else:
        text = format(v, ".17g")
        # the YAML 1.1 float pattern needs a dot in the mantissa
        if "." not in text:
            mant, _, exp = text.partition("e")
            text = mant + ".0" + ("e" + exp if exp else "")
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


_Dumper.add_representer(float, _float_repr)


def write_report(path, report, extra=None, timing=True) -> None:
    """Structured text summary of a RunReport."""
    doc = {
        "method": report.method,
        "n_samples": int(report.samples.shape[0]),
        "dim": int(report.samples.shape[1]),
        "nfe_total": report.nfe,
        "nfe_mean": report.nfe_mean,
        "nfe_solver_mean": report.nfe_solver_mean,
        "denoise_evals": int(report.denoise_evals.sum()),
        "steps_accepted": int(report.steps_accepted.sum()),
        "steps_rejected": int(report.steps_rejected.sum()),
        "wall_time": float(report.wall_time) if timing else 0.0,
    }
    if extra:
        doc.update({k: float(v) if isinstance(v, (float, np.floating)) else v
                    for k, v in extra.items()})
    doc["nfe_per_sample"] = [int(v) for v in report.nfe_per_sample]
    with open(path, "w") as fh:
        yaml.dump(doc, fh, Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=100)
