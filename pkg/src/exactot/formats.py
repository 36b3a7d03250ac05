"""File formats: instance JSON, report JSON, sparse plan files and provenance CSVs.

Every CSV starts with one ``# config: {...}`` comment line carrying the resolved
run configuration, followed by an RFC 4180 header row and data rows.  Readers
that understand ``#`` comments (``pandas.read_csv(comment="#")`` and
:func:`read_csv` here) skip it.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import DEFAULT_SCALE, OTInstance, SamplePair, TransportPlan, instance_from_matrix, make_instance
from .errors import InvalidInput

SCHEMA_VERSION = 1
CONFIG_PREFIX = "# config: "


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True)


def write_csv(path, header, rows, config: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(CONFIG_PREFIX + dumps({"schema_version": SCHEMA_VERSION, **config}) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(_jsonable(list(rows)))
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Return ``(config, rows)``; row values stay strings."""
    config: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith(CONFIG_PREFIX):
                config = json.loads(line[len(CONFIG_PREFIX):])
            elif not line.startswith("#"):
                lines.append(line)
    return config, list(csv.DictReader(lines))


def instance_to_dict(inst: OTInstance) -> dict:
    """Sample-backed instances store their samples, others the raw cost and marginals."""
    s = inst.samples
    if s is not None:
        return {"n": s.n, "m": s.m, "dim": s.dim, "seed": s.seed, "kind_u": s.kind_u,
                "kind_v": s.kind_v, "u": s.u.tolist(), "v": s.v.tolist(), "scale": inst.scale}
    return {"n": inst.n, "m": inst.m, "cost": inst.cost.tolist(),
            "p": [str(x) for x in inst.p], "q": [str(x) for x in inst.q], "scale": inst.scale}


def instance_from_dict(data: dict) -> OTInstance:
    try:
        if "cost" in data:
            return instance_from_matrix(data["cost"], data.get("p"), data.get("q"),
                                        scale=int(data.get("scale", 1)))
        u = np.asarray(data["u"], dtype=np.float64)
        v = np.asarray(data["v"], dtype=np.float64)
    except KeyError as exc:
        raise InvalidInput(f"instance file is missing field {exc}") from None
    if u.ndim == 1:
        u, v = u[:, None], v[:, None]
    samples = SamplePair(u, v, int(data.get("seed", 0)), data.get("kind_u", "file"), data.get("kind_v", "file"))
    return make_instance(samples, scale=int(data.get("scale", DEFAULT_SCALE)))


def save_instance(inst: OTInstance, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(instance_to_dict(inst)) + "\n", encoding="utf-8")
    return path


def load_instance(path) -> OTInstance:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from None
    return instance_from_dict(data)


def save_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, **report}
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def save_plan(plan: TransportPlan, path, config: dict) -> Path:
    """Sparse arc list ``i, j, mass_units, mass`` with mass = mass_units / denominator."""
    rows = [(i, j, units, float(Fraction(int(units), plan.denominator)))
            for i, j, units in zip(plan.rows.tolist(), plan.cols.tolist(), plan.mass.tolist())]
    return write_csv(path, ["i", "j", "mass_units", "mass"], rows,
                     {**config, "n": plan.n, "m": plan.m, "denominator": plan.denominator})


def load_plan(path) -> TransportPlan:
    config, rows = read_csv(path)
    entries = {(int(r["i"]), int(r["j"])): int(r["mass_units"]) for r in rows}
    return TransportPlan.from_entries(int(config["n"]), int(config["m"]), entries, int(config["denominator"]))


OUTER_HEADER = ["k", "h_size", "pivots", "evals", "objective_scaled", "time_s"]
SINKHORN_HEADER = ["iter", "time_s", "objective_rounded", "du_max", "dv_max"]


def write_outer_trace(report, path, config: dict) -> Path:
    rows = [(r.k, r.h_size, r.pivots, r.evaluations, r.objective_scaled, r.time_s) for r in report.iterations]
    return write_csv(path, OUTER_HEADER, rows, config)


def write_sinkhorn_trace(result, path, config: dict) -> Path:
    rows = [(tp.iteration, tp.time_s, tp.objective_rounded, tp.du_max, tp.dv_max) for tp in result.trace]
    return write_csv(path, SINKHORN_HEADER, rows, config)
