"""CSV schemas for experiment outputs.

All writers produce files that parse back to equal values (floats are
written with ``repr`` so they round-trip bit for bit).  Leading lines of
the form ``# key=value`` carry run metadata (for example the evaluation
transform seed) and are returned as a dict by the readers.  Parse errors
name the offending line number.
"""

import numpy as np

from .errors import DataFormatError
from .models import EpochStats, EvalReport

EVAL_HEADER = ["model", "transform", "top1", "delta"] + [f"class{c}" for c in range(10)]
CURVE_HEADER = ["epoch", "mean_loss", "train_acc"]
BAR_HEADER = ["model", "transform", "top1"]
HIST_HEADER = ["bin_center", "mass"]


def _fmt(value) -> str:
    if isinstance(value, float):  # incl. np.float64; repr of the builtin round-trips
        return repr(float(value))
    return str(value)


def _read_lines(path):
    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            rows.append((lineno, line.split(",")))
    return meta, rows


def _check_header(path, rows, expected):
    if not rows:
        raise DataFormatError(f"{path}: empty CSV")
    lineno, header = rows[0]
    if header != expected:
        raise DataFormatError(
            f"{path}: line {lineno}: header {header} does not match expected {expected}"
        )
    return rows[1:]


def _parse_float(path, lineno, text):
    try:
        return float(text)
    except ValueError as exc:
        raise DataFormatError(f"{path}: line {lineno}: bad number {text!r}") from exc


def write_eval_reports(path, reports, meta=None):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(EVAL_HEADER) + "\n")
        for r in reports:
            cells = [r.model, r.transform, _fmt(r.top1), _fmt(r.delta)]
            cells += [_fmt(v) for v in r.per_class]
            fh.write(",".join(cells) + "\n")


def read_eval_reports(path):
    """Returns ``(reports, meta)``; inverse of :func:`write_eval_reports`."""
    meta, rows = _read_lines(path)
    rows = _check_header(path, rows, EVAL_HEADER)
    reports = []
    for lineno, cells in rows:
        if len(cells) != len(EVAL_HEADER):
            raise DataFormatError(
                f"{path}: line {lineno}: expected {len(EVAL_HEADER)} fields, got {len(cells)}"
            )
        reports.append(
            EvalReport(
                model=cells[0],
                transform=cells[1],
                top1=_parse_float(path, lineno, cells[2]),
                delta=_parse_float(path, lineno, cells[3]),
                per_class=[_parse_float(path, lineno, c) for c in cells[4:]],
            )
        )
    return reports, meta


def write_loss_curve(path, curve, meta=None):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(CURVE_HEADER) + "\n")
        for s in curve:
            fh.write(f"{s.epoch},{_fmt(s.mean_loss)},{_fmt(s.train_accuracy)}\n")


def read_loss_curve(path):
    meta, rows = _read_lines(path)
    rows = _check_header(path, rows, CURVE_HEADER)
    curve = []
    for lineno, cells in rows:
        if len(cells) != 3:
            raise DataFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(cells)}")
        curve.append(
            EpochStats(
                epoch=int(cells[0]),
                mean_loss=_parse_float(path, lineno, cells[1]),
                train_accuracy=_parse_float(path, lineno, cells[2]),
            )
        )
    return curve, meta


def write_bar_chart(path, reports):
    """Accuracy matrix flattened to one (model, transform, top1) row each."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(BAR_HEADER) + "\n")
        for r in reports:
            fh.write(f"{r.model},{r.transform},{_fmt(r.top1)}\n")


def read_bar_chart(path):
    _, rows = _read_lines(path)
    rows = _check_header(path, rows, BAR_HEADER)
    out = []
    for lineno, cells in rows:
        if len(cells) != 3:
            raise DataFormatError(f"{path}: line {lineno}: expected 3 fields, got {len(cells)}")
        out.append((cells[0], cells[1], _parse_float(path, lineno, cells[2])))
    return out


def write_histogram_dump(path, centers, masses):
    centers = np.asarray(centers)
    masses = np.asarray(masses)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(HIST_HEADER) + "\n")
        for c, m in zip(centers, masses):
            fh.write(f"{_fmt(float(c))},{_fmt(float(m))}\n")


def read_histogram_dump(path):
    _, rows = _read_lines(path)
    rows = _check_header(path, rows, HIST_HEADER)
    centers = []
    masses = []
    for lineno, cells in rows:
        if len(cells) != 2:
            raise DataFormatError(f"{path}: line {lineno}: expected 2 fields, got {len(cells)}")
        centers.append(_parse_float(path, lineno, cells[0]))
        masses.append(_parse_float(path, lineno, cells[1]))
    return np.array(centers), np.array(masses)
