"""JSON instance files, trace CSV files and run metadata.

Floats go through ``repr`` (JSON) or ``%.17g`` (CSV); both read back to the
identical double.
"""

import csv
import json
import math
from pathlib import Path
from typing import Union

import numpy as np

from .dictionaries import CONE_SECTION, FINITE, Dictionary
from .engine import Trace
from .geometry import (
    AFFINE,
    BALL,
    CONE,
    HALFSPACE,
    HALFSPACE_CONE,
    SUBSPACE,
    ConvexSet,
)
from .instances import InstanceSpec


class ConfigError(ValueError):
    """An instance or run configuration is malformed; carries the field name."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _floats(a):
    return np.asarray(a, dtype=np.float64).tolist()


def set_to_dict(s: ConvexSet) -> dict:
    out = {"kind": s.kind}
    if s.label:
        out["label"] = s.label
    if s.kind in (SUBSPACE, AFFINE):
        out["basis"] = _floats(s.rows)
        out["dim"] = s.dim
    if s.kind == AFFINE:
        out["offset"] = _floats(s.vector)
    if s.kind == HALFSPACE:
        out["normal"] = _floats(s.vector)
        out["offset"] = float(s.scalar)
    if s.kind == BALL:
        out["center"] = _floats(s.vector)
        out["radius"] = float(s.scalar)
    if s.kind == CONE:
        out["generators"] = _floats(s.rows)
    if s.kind == HALFSPACE_CONE:
        out["normals"] = _floats(s.rows)
    return out


def set_from_dict(d: dict, dim=None, validate=True) -> ConvexSet:
    kind = d.get("kind")
    label = d.get("label", "")
    dim = d.get("dim", dim)
    try:
        if kind == SUBSPACE:
            return ConvexSet.subspace(d["basis"], dim, label=label, validate=validate)
        if kind == AFFINE:
            return ConvexSet.affine(d["basis"], d["offset"], label=label, validate=validate)
        if kind == HALFSPACE:
            return ConvexSet.halfspace(d["normal"], d.get("offset", 0.0), label=label,
                                       validate=validate)
        if kind == BALL:
            return ConvexSet.ball(d["center"], d["radius"], label=label, validate=validate)
        if kind == CONE:
            return ConvexSet.cone(d["generators"], dim, label=label, validate=validate)
        if kind == HALFSPACE_CONE:
            return ConvexSet.halfspace_cone(d["normals"], dim, label=label, validate=validate)
    except KeyError as exc:
        raise ConfigError(f"sets[{label or kind}]", f"missing field {exc}") from None
    raise ConfigError("kind", f"unknown set kind {kind!r}")


def dictionary_to_dict(D: Dictionary) -> dict:
    out = {"kind": D.kind}
    if D.label:
        out["label"] = D.label
    if D.kind == FINITE:
        out["atoms"] = _floats(D.atoms)
    else:
        out["cone"] = set_to_dict(D.cone)
    return out


def dictionary_from_dict(d: dict, cones=None, dim=None, validate=True) -> Dictionary:
    kind = d.get("kind")
    label = d.get("label", "")
    if kind == FINITE:
        return Dictionary.finite(d["atoms"], dim, label=label, validate=validate)
    if kind == CONE_SECTION:
        ref = d["cone"]
        if isinstance(ref, str):
            if not cones or ref not in cones:
                raise ConfigError("dictionaries.cone", f"unknown cone reference {ref!r}")
            cone = cones[ref]
        else:
            cone = set_from_dict(ref, dim)
        return Dictionary.cone_section(cone, label=label)
    raise ConfigError("dictionaries.kind", f"unknown dictionary kind {kind!r}")


def instance_to_dict(inst: InstanceSpec) -> dict:
    out = {"id": inst.id, "dim": inst.dim, "mode": inst.mode, "certificate": inst.certificate,
           "seed": inst.seed}
    if inst.mode == "projection":
        out["sets"] = [set_to_dict(s) for s in inst.sets]
    else:
        out["dictionaries"] = [dictionary_to_dict(D) for D in inst.dictionaries]
    if inst.schedule is not None:
        out["schedule"] = inst.schedule
    if inst.x0 is not None:
        out["x0"] = _floats(inst.x0)
    if inst.info:
        out["info"] = inst.info
    if inst.skip_validation:
        out["skip_validation"] = True
    return out


def instance_from_dict(d: dict) -> InstanceSpec:
    for key in ("dim", "mode"):
        if key not in d:
            raise ConfigError(key, "missing")
    dim = int(d["dim"])
    mode = d["mode"]
    skip = bool(d.get("skip_validation", False))
    inst = InstanceSpec(dim, mode, d.get("certificate", ""), int(d.get("seed", 0)),
                        schedule=d.get("schedule"), id=d.get("id", ""),
                        info=d.get("info", {}), skip_validation=skip)
    try:
        if mode == "projection":
            if "sets" not in d:
                raise ConfigError("sets", "missing for projection mode")
            inst.sets = [set_from_dict(s, dim, validate=not skip) for s in d["sets"]]
        elif mode == "greedy":
            if "dictionaries" not in d:
                raise ConfigError("dictionaries", "missing for greedy mode")
            cones = {c["label"]: set_from_dict(c, dim) for c in d.get("cones", [])}
            inst.dictionaries = [dictionary_from_dict(D, cones, dim, validate=not skip)
                                 for D in d["dictionaries"]]
        else:
            raise ConfigError("mode", f"expected 'projection' or 'greedy', got {mode!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("sets" if mode == "projection" else "dictionaries", str(exc)) from None
    if "x0" in d:
        inst.x0 = np.asarray(d["x0"], dtype=np.float64)
    return inst


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=True) + "\n")


def save_instance(inst: InstanceSpec, path):
    dump_json(instance_to_dict(inst), path)


def load_instance(path) -> InstanceSpec:
    try:
        data = json.loads(Path(str(path)).read_text() if not hasattr(path, "read_text")
                          else path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("instance", f"invalid JSON ({exc})") from None
    return instance_from_dict(data)


# -- traces -------------------------------------------------------------------


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % v


def write_trace_csv(trace: Trace, path):
    K = trace.K
    header = ["n", "index", "norm", "step_norm", "coefficient"] + [f"dist_{j + 1}"
                                                                   for j in range(K)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(trace.steps):
            row = [i + 1, int(trace.index[i]), _fmt(trace.norm[i]), _fmt(trace.step_norm[i]),
                   _fmt(trace.coefficient[i]) if trace.coefficient is not None else ""]
            if trace.distances is not None:
                row += [_fmt(v) for v in trace.distances[i]]
            else:
                row += [""] * K
            w.writerow(row)


def trace_metadata(trace: Trace, extra=None) -> dict:
    meta = dict(trace.metadata)
    meta.update({
        "mode": trace.mode,
        "x0": _floats(trace.x0),
        "final_norm": trace.final_norm,
        "r_est": trace.r_est,
        "violation": trace.violation,
        "tail_start": trace.tail_start,
        "iterates": {str(n): _floats(v) for n, v in sorted(trace.iterates.items())},
    })
    if extra:
        meta.update(extra)
    return meta


def save_trace(trace: Trace, out_dir, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    dump_json(trace_metadata(trace, extra), out / "metadata.json")


def load_trace(path: Union[str, Path]) -> Trace:
    """Read ``trace.csv`` plus its ``metadata.json`` sidecar (path is either file or dir)."""
    p = Path(path)
    if p.is_dir():
        p = p / "trace.csv"
    meta = json.loads((p.parent / "metadata.json").read_text())
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    K = sum(1 for h in header if h.startswith("dist_"))
    col = lambda name: header.index(name)  # noqa: E731
    num = lambda s: float(s) if s != "" else np.nan  # noqa: E731
    index = np.array([int(r[col("index")]) for r in body], dtype=np.int64)
    norm = np.array([num(r[col("norm")]) for r in body])
    step = np.array([num(r[col("step_norm")]) for r in body])
    greedy = meta.get("mode") == "greedy"
    coef = np.array([num(r[col("coefficient")]) for r in body]) if greedy else None
    dists = None
    if K and body and body[0][col("dist_1")] != "":
        dists = np.array([[num(v) for v in r[col("dist_1"):col("dist_1") + K]] for r in body])
    iterates = {int(n): np.asarray(v, dtype=np.float64) for n, v in meta["iterates"].items()}
    keep = {k: v for k, v in meta.items() if k not in ("iterates", "x0")}
    return Trace(meta.get("mode", "projection"), np.asarray(meta["x0"], dtype=np.float64),
                 index, norm, step, coef, dists, iterates, int(meta.get("tail_start", 0)),
                 metadata=keep, violation=meta.get("violation"))
