"""JSON documents for triplets (schema ``levy-triplet/1``).

Atomic measures round-trip bit-exactly because floats are written with
``repr`` precision by the :mod:`json` module. Density measures are written by
name (``form`` + ``params``), so only densities built from
:data:`levyito.measure.DENSITY_FORMS` can be serialized.
"""
import hashlib
import json
import math

import numpy as np

from .measure import DENSITY_FORMS, AtomicMeasure, DensityMeasure, LevyTriplet

TRIPLET_SCHEMA = "levy-triplet/1"
_TRIPLET_KEYS = {"schema", "dimension", "drift", "covariance", "measure"}


class SchemaError(ValueError):
    """A document does not follow its declared schema."""


def _num(v):
    if isinstance(v, str):
        if v in ("inf", "+inf"):
            return math.inf
        if v == "-inf":
            return -math.inf
        raise SchemaError(f"expected a number, got {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"expected a number, got {v!r}")
    return float(v)


def _bound(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def triplet_to_dict(t):
    m = t.measure
    if isinstance(m, AtomicMeasure):
        atoms = []
        for x, mass in zip(m.locations.tolist(), m.masses.tolist()):
            atoms.append({"x": x[0] if t.dim == 1 else x, "mass": mass})
        measure = {"type": "atomic", "atoms": atoms}
    elif isinstance(m, DensityMeasure):
        if m.form is None:
            raise SchemaError("only named density forms can be serialized")
        support = [[_bound(iv.lo), _bound(iv.hi)] for iv in m.support]
        measure = {"type": "density", "density": {"form": m.form, "params": dict(m.params), "support": support}}
    else:
        raise SchemaError(f"cannot serialize measure {type(m).__name__}")
    return {
        "schema": TRIPLET_SCHEMA,
        "dimension": t.dim,
        "drift": t.drift.tolist(),
        "covariance": t.covariance.tolist(),
        "measure": measure,
    }


def triplet_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("triplet document must be an object")
    unknown = set(doc) - _TRIPLET_KEYS
    if unknown:
        raise SchemaError(f"unknown triplet fields: {sorted(unknown)}")
    if doc.get("schema", TRIPLET_SCHEMA) != TRIPLET_SCHEMA:
        raise SchemaError(f"unsupported triplet schema {doc.get('schema')!r}")
    try:
        n = int(doc["dimension"])
        drift = [_num(v) for v in doc["drift"]]
        cov = [[_num(v) for v in row] for row in doc["covariance"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed triplet document: {exc}") from None
    if len(drift) != n:
        raise SchemaError("drift length does not match dimension")
    if np.shape(cov) != (n, n):
        raise SchemaError("covariance shape does not match dimension")
    return LevyTriplet(np.array(drift), np.array(cov), _measure_from_dict(doc.get("measure", {"type": "atomic", "atoms": []}), n))


def _measure_from_dict(doc, n):
    if not isinstance(doc, dict):
        raise SchemaError("measure must be an object")
    kind = doc.get("type")
    if kind == "atomic":
        if set(doc) - {"type", "atoms"}:
            raise SchemaError(f"unknown measure fields: {sorted(set(doc) - {'type', 'atoms'})}")
        atoms = []
        for a in doc.get("atoms", []):
            if not isinstance(a, dict) or set(a) != {"x", "mass"}:
                raise SchemaError("each atom needs exactly the fields x and mass")
            x = a["x"]
            x = [_num(v) for v in x] if isinstance(x, list) else [_num(x)]
            if len(x) != n:
                raise SchemaError("atom location does not match dimension")
            atoms.append((x, _num(a["mass"])))
        return AtomicMeasure.from_atoms(atoms, dim=n)
    if kind == "density":
        if n != 1:
            raise SchemaError("density measures are one-dimensional")
        if set(doc) - {"type", "density"}:
            raise SchemaError("unknown measure fields")
        d = doc.get("density")
        if not isinstance(d, dict) or set(d) - {"form", "params", "support"}:
            raise SchemaError("density needs the fields form, params, support")
        form = d.get("form")
        if form not in DENSITY_FORMS:
            raise SchemaError(f"unknown density form {form!r}")
        params = {k: _num(v) for k, v in d.get("params", {}).items()}
        support = [(_num(lo), _num(hi)) for lo, hi in d.get("support", [])]
        try:
            return DensityMeasure.from_form(form, params, support)
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad density: {exc}") from None
    raise SchemaError(f"unknown measure type {kind!r}")


def dumps(doc):
    """Canonical JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def triplet_to_json(t):
    return dumps(triplet_to_dict(t))


def triplet_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    return triplet_from_dict(doc)


def triplet_hash(t):
    """SHA-256 of the canonical triplet document."""
    return hashlib.sha256(triplet_to_json(t).encode()).hexdigest()
