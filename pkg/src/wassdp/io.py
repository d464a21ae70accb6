"""File formats: CSV samples, canonical JSON for distributions, metrics, trees and ledgers."""

import csv
import json
import math
from importlib import resources

import numpy as np

from wassdp.core_dist import DiscreteDistribution, FiniteMetric, GridDomain
from wassdp.errors import DomainMismatchError, InputFormatError, ParameterError
from wassdp.hst import CellDomain, Hst


def dumps(obj):
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path):
    text = dumps(obj)
    if path is None or path == "-":
        print(text, end="")
        return
    with open(path, "w") as fh:
        fh.write(text)


def read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputFormatError(path, 0, exc.strerror or str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(path, exc.lineno, exc.msg) from exc


def read_samples(path, columns=1):
    """Rows of a CSV file as floats (columns=1 gives a vector).

    A first line that does not parse as numbers is taken as a header.
    """
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputFormatError(path, 0, exc.strerror or str(exc)) from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise InputFormatError(path, lineno, f"cannot parse {','.join(row)!r}") from None
            if len(vals) != columns:
                raise InputFormatError(
                    path, lineno, f"expected {columns} value(s), found {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise InputFormatError(path, 0, "no samples found")
    out = np.array(rows)
    return out[:, 0] if columns == 1 else out


def read_labels(path):
    """One label per line (first column), for samples on a finite metric."""
    labels = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputFormatError(path, 0, exc.strerror or str(exc)) from exc
    with fh:
        for row in csv.reader(fh):
            if row and row[0].strip():
                labels.append(row[0].strip())
    if not labels:
        raise InputFormatError(path, 0, "no samples found")
    return labels


def _number(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def distribution_to_json(P):
    return {"domain": P.domain.to_json(), "weights": [float(w) for w in P.weights]}


def domain_from_json(obj, metric=None):
    if not isinstance(obj, dict):
        raise ParameterError("domain must be an object")
    if "metric_id" in obj:
        if metric is None:
            raise DomainMismatchError(
                f"distribution refers to metric {obj['metric_id']}; supply the metric file"
            )
        if metric.metric_id != obj["metric_id"]:
            raise DomainMismatchError("metric file does not match the distribution's metric_id")
        return metric
    if "cells" in obj:
        c = obj["cells"]
        return CellDomain(c["dim"], c["depth"], c["shift"], c["lo"], c["hi"])
    return GridDomain(obj["a"], obj["b"], obj["gamma"])


def distribution_from_json(obj, metric=None):
    try:
        domain = domain_from_json(obj["domain"], metric)
        weights = obj["weights"]
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed distribution object: {exc}") from exc
    try:
        return DiscreteDistribution(domain, weights)
    except (DomainMismatchError, TypeError) as exc:
        raise ParameterError(str(exc)) from exc


def load_distribution(path, metric=None):
    obj = read_json(path)
    try:
        return distribution_from_json(obj, metric)
    except ParameterError as exc:
        raise InputFormatError(path, 1, str(exc)) from exc


def save_distribution(P, path):
    write_json(distribution_to_json(P), path)


def metric_from_json(obj):
    try:
        return FiniteMetric(obj["dist"], labels=obj.get("labels"), metric_id=obj.get("metric_id"))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParameterError(f"malformed metric object: {exc}") from exc


def load_metric(path):
    obj = read_json(path)
    try:
        return metric_from_json(obj)
    except ParameterError as exc:
        raise InputFormatError(path, 1, str(exc)) from exc


def hst_from_json(obj, domain=None):
    try:
        return Hst.from_json(obj, domain=domain)
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed HST object: {exc}") from exc


def load_schema(name):
    text = resources.files("wassdp").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def jsonable(x):
    """Convert numpy scalars/arrays and infinities into plain JSON values."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return _number(float(x))
    return x
