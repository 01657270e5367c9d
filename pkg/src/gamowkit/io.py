"""CSV and JSON readers/writers for wave functions, lineshapes, traces and reports.

Array data is CSV with a fixed header; structured data is JSON.  Floats go
out with 17 significant digits so doubles survive a round trip.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError
from .hardy import EnergyGrid, SampledWaveFunction
from .jumps import DarkPeriod, EventLog, FluorescenceTrace
from .resonance import ResonancePole

SCHEMA_VERSION = "1"
SPACING_RTOL = 1e-9

WAVEFUNCTION_HEADER = ["E", "re", "im"]
TRACE_HEADER = ["t_bin_start", "counts"]
DARK_HEADER = ["t0", "t1"]
EVENT_HEADER = ["t", "from", "to", "photon"]


def fmt(x) -> str:
    return format(float(x), ".17g")


def _read_rows(path, header, optional=()):
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty", line=1) from None
        first = [c.strip() for c in first]
        allowed = [header + list(optional[:k]) for k in range(len(optional) + 1)]
        if first not in allowed:
            raise ParseError(
                f"expected header {','.join(header + list(optional))!r}, got {','.join(first)!r}",
                line=1,
            )
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(first):
                raise ParseError(f"expected {len(first)} fields, got {len(row)}", line=reader.line_num)
            rows.append((reader.line_num, row))
    if not rows:
        raise ParseError(f"{path} has a header but no data rows", line=2)
    return first, rows


def _float(text, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", line=line)
    return value


def _check_uniform(x, what):
    d = np.diff(x)
    if np.any(d <= 0):
        k = int(np.argmax(d <= 0))
        raise SchemaError(f"{what} must be strictly increasing (row {k + 3})")
    h = (x[-1] - x[0]) / (x.size - 1)
    bad = np.abs(d - h) > SPACING_RTOL * abs(h)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise SchemaError(f"{what} spacing is not uniform (row {k + 3}, relative tolerance {SPACING_RTOL:g})")
    return h


# --------------------------------------------------------------------------
# wave functions


def save_wavefunction(path, wf: SampledWaveFunction) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(WAVEFUNCTION_HEADER)
        for e, v in zip(wf.grid.points, wf.values):
            writer.writerow([fmt(e), fmt(v.real), fmt(v.imag)])


def load_wavefunction(path) -> SampledWaveFunction:
    """Read an ``E,re,im`` file; the energies must form a uniform grid."""
    _, rows = _read_rows(path, WAVEFUNCTION_HEADER)
    data = np.array([[_float(c, line) for c in row] for line, row in rows])
    if data.shape[0] < 8:
        raise SchemaError(f"need at least 8 grid points, got {data.shape[0]}")
    _check_uniform(data[:, 0], "energy column E")
    grid = EnergyGrid(data[0, 0], data[-1, 0], data.shape[0])
    return SampledWaveFunction(grid, data[:, 1] + 1j * data[:, 2])


# --------------------------------------------------------------------------
# lineshapes and poles


def save_lineshape(path, energies, y, sigma=None) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if sigma is None:
            writer.writerow(["E", "y"])
            writer.writerows([fmt(e), fmt(v)] for e, v in zip(energies, y))
        else:
            writer.writerow(["E", "y", "sigma"])
            writer.writerows([fmt(e), fmt(v), fmt(s)] for e, v, s in zip(energies, y, sigma))


def load_lineshape(path):
    """Return ``(E, y, sigma)``; ``sigma`` is None when the column is absent."""
    header, rows = _read_rows(path, ["E", "y"], optional=("sigma",))
    data = np.array([[_float(c, line) for c in row] for line, row in rows])
    sigma = data[:, 2] if len(header) == 3 else None
    return data[:, 0], data[:, 1], sigma


def save_pole(path, pole: ResonancePole) -> None:
    save_json(path, pole.to_dict())


def load_pole(path) -> ResonancePole:
    return ResonancePole.from_dict(load_json(path))


# --------------------------------------------------------------------------
# simulation data


def save_events(path, log: EventLog) -> None:
    labels = [f"{a},{b}" for a, b in log.transitions]
    with Path(path).open("w", newline="") as handle:
        handle.write(",".join(EVENT_HEADER) + "\n")
        for t, c, p in zip(log.times.tolist(), log.codes.tolist(), log.photon.tolist()):
            pair = "background,background" if c < 0 else labels[c]
            handle.write(f"{t!r},{pair},{int(p)}\n")


def save_trace(path, trace: FluorescenceTrace) -> None:
    with Path(path).open("w", newline="") as handle:
        handle.write(",".join(TRACE_HEADER) + "\n")
        for t, c in zip(trace.bin_starts.tolist(), trace.counts.tolist()):
            handle.write(f"{fmt(t)},{c}\n")


def load_trace(path) -> FluorescenceTrace:
    _, rows = _read_rows(path, TRACE_HEADER)
    t = np.array([_float(row[0], line) for line, row in rows])
    counts = []
    for line, row in rows:
        try:
            c = int(row[1])
        except ValueError:
            raise ParseError(f"counts must be a non-negative integer, got {row[1]!r}", line=line) from None
        if c < 0:
            raise ParseError(f"counts must be non-negative, got {c}", line=line)
        counts.append(c)
    if t.size < 2:
        raise SchemaError("a trace needs at least two bins")
    width = _check_uniform(t, "bin start column")
    return FluorescenceTrace(float(width), np.array(counts, dtype=np.int64), float(t[0]))


def save_dark_periods(path, periods) -> None:
    with Path(path).open("w", newline="") as handle:
        handle.write(",".join(DARK_HEADER) + "\n")
        for p in periods:
            handle.write(f"{fmt(p.t0)},{fmt(p.t1)}\n")


def load_dark_periods(path) -> list[DarkPeriod]:
    _, rows = _read_rows(path, DARK_HEADER)
    periods = []
    for line, row in rows:
        t0, t1 = _float(row[0], line), _float(row[1], line)
        if not t1 > t0:
            raise ParseError(f"dark period must end after it starts ({t0}, {t1})", line=line)
        periods.append(DarkPeriod(t0, t1))
    return periods


# --------------------------------------------------------------------------
# JSON


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    # repr of a float is the shortest string that round-trips exactly
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False)


def save_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def save_report(path, report) -> None:
    data = _jsonable(report)
    if isinstance(data, dict) and "schema_version" not in data:
        data = {"schema_version": SCHEMA_VERSION, **data}
    save_json(path, data)


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    if not text.strip():
        raise ParseError(f"{path} is empty", line=1)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
