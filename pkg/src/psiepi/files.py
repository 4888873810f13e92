"""Scenario JSON files and result CSVs.

Scenario files are canonical JSON: sorted keys, two-space indent, shortest
round-trip float repr, trailing newline. Complex numbers are written as
``[re, im]`` pairs in complex scenarios and real numbers as plain floats
otherwise, so reading and re-writing a canonical file is byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidScenario, PsiEpiError, ScenarioFormatError
from .inequality import FIELDS, Scenario
from .quantum import NORM_TOL, Measurement, PureState

FORMAT_VERSION = "1"


def _number(x, complex_field: bool):
    x = complex(x)
    if complex_field:
        return [float(x.real), float(x.imag)]
    return float(x.real)


def _vector(v, complex_field):
    return [_number(x, complex_field) for x in v]


def scenario_to_dict(scenario: Scenario, metadata: dict | None = None) -> dict:
    cplx = scenario.field == "complex"
    return {
        "version": FORMAT_VERSION,
        "dim": scenario.dim,
        "n": scenario.n,
        "field": scenario.field,
        "states": [_vector(s.coeffs, cplx) for s in scenario.states],
        "measurements": [
            {
                "j1": j1,
                "j2": j2,
                "effects": [[_vector(row, cplx) for row in e.matrix] for e in m.effects],
            }
            for (j1, j2), m in scenario.measurements.items()
        ],
        "metadata": metadata or {},
    }


def dumps_scenario(scenario: Scenario, metadata: dict | None = None) -> str:
    return json.dumps(scenario_to_dict(scenario, metadata), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_scenario(path, scenario: Scenario, metadata: dict | None = None) -> None:
    atomic_write_text(path, dumps_scenario(scenario, metadata))


def _parse_number(x, complex_field, where):
    if complex_field:
        if (not isinstance(x, list) or len(x) != 2
                or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in x)):
            raise ScenarioFormatError(f"{where}: complex entries must be [re, im] pairs")
        return complex(x[0], x[1])
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioFormatError(f"{where}: real entries must be plain numbers")
    return float(x)


def _parse_vector(v, dim, complex_field, where):
    if not isinstance(v, list) or len(v) != dim:
        raise ScenarioFormatError(f"{where}: expected a list of {dim} entries")
    vals = [_parse_number(x, complex_field, where) for x in v]
    return np.array(vals, dtype=complex if complex_field else float)


def scenario_from_dict(data) -> tuple[Scenario, dict]:
    """Parse and validate. Raises ScenarioFormatError for malformed content and
    InvalidScenario (or another PsiEpiError) for well-formed content that breaks
    an invariant."""
    if not isinstance(data, dict):
        raise ScenarioFormatError("top level must be a JSON object")
    missing = {"version", "dim", "n", "field", "states", "measurements"} - set(data)
    if missing:
        raise ScenarioFormatError(f"missing keys: {sorted(missing)}")
    if data["version"] != FORMAT_VERSION:
        raise ScenarioFormatError(f"unsupported version {data['version']!r}")
    dim, n, field = data["dim"], data["n"], data["field"]
    if not isinstance(dim, int) or not isinstance(n, int) or isinstance(dim, bool) or isinstance(n, bool):
        raise ScenarioFormatError("dim and n must be integers")
    if field not in FIELDS:
        raise ScenarioFormatError(f"field must be one of {FIELDS}")
    cplx = field == "complex"
    states_raw = data["states"]
    if not isinstance(states_raw, list) or len(states_raw) != n + 1:
        raise ScenarioFormatError(f"expected n+1 = {n + 1} states")
    meas_raw = data["measurements"]
    if not isinstance(meas_raw, list):
        raise ScenarioFormatError("measurements must be a list")
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        raise ScenarioFormatError("metadata must be an object")

    vectors = [_parse_vector(v, dim, cplx, f"state {j}") for j, v in enumerate(states_raw)]
    measurements = {}
    for idx, m in enumerate(meas_raw):
        if not isinstance(m, dict) or not {"j1", "j2", "effects"} <= set(m):
            raise ScenarioFormatError(f"measurement {idx}: needs j1, j2 and effects")
        key = (m["j1"], m["j2"])
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in key):
            raise ScenarioFormatError(f"measurement {idx}: j1 and j2 must be integers")
        effs = m["effects"]
        if not isinstance(effs, list) or len(effs) != 3:
            raise ScenarioFormatError(f"measurement {key}: needs exactly 3 effects")
        mats = []
        for i, e in enumerate(effs):
            if not isinstance(e, list) or len(e) != dim:
                raise ScenarioFormatError(f"measurement {key} effect {i}: expected {dim} rows")
            mats.append(np.array([_parse_vector(r, dim, cplx, f"measurement {key} effect {i}")
                                  for r in e]))
        if key in measurements:
            raise InvalidScenario(f"duplicate measurement for pair {key}")
        measurements[key] = mats

    for j, v in enumerate(vectors):
        if not np.all(np.isfinite(v)):
            raise InvalidScenario(f"state {j} has non-finite amplitudes")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidScenario(f"state {j} is not normalised (norm {norm!r})")
    try:
        states = tuple(PureState(v) for v in vectors)
        scenario = Scenario(states, {k: Measurement.from_matrices(v) for k, v in measurements.items()}, field)
    except InvalidScenario:
        raise
    except PsiEpiError as exc:
        raise InvalidScenario(str(exc)) from exc
    problems = scenario.problems()
    if problems:
        raise InvalidScenario(problems[0])
    return scenario, metadata


def loads_scenario(text: str) -> tuple[Scenario, dict]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(data)


def load_scenario(path) -> tuple[Scenario, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read {path}: {exc}") from exc
    return loads_scenario(text)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    d: int
    n: int
    s: float
    sigma: float
    kappa0_bound: float
    eta_threshold: float
    epsilon0: float
    seed: int
    wall_ms: float


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def results_to_csv(rows: Iterable[ResultRow]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_cell(v) for v in astuple(r)))
    return "\n".join(lines) + "\n"


def write_results(path, rows: Iterable[ResultRow]) -> None:
    atomic_write_text(path, results_to_csv(rows))


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({k: (int(v) if k in ("d", "n", "seed") else float(v)) for k, v in row.items()})
        return out
