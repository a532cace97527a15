"""Flat-file formats: models, samples, decision trees, sampling trees, reports.

Model files are JSON with fields n, k, weights, marginals (row-major) and a
subcube flag; subcube entries are serialized as the strings "0", "1/2", "1"
so they survive round trips exactly.  Sample files carry one sample per line
(n characters of 0/1) with an optional tab-separated label bit.  Tree files
mirror the node/edge schema as JSON and round-trip stably.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidModelError
from .models import ProductMixture, SubcubeMixture
from .sdt import SdtDecision, SdtLeaf, SdtStochastic, StochasticDecisionTree
from .tree import SamplingTree, TreeLeaf, TreeNode

SCHEMA_VERSION = 1

_SUBCUBE_STR = {0.0: "0", 0.5: "1/2", 1.0: "1"}
_SUBCUBE_VAL = {"0": 0.0, "1/2": 0.5, "1": 1.0}


def model_to_dict(model: ProductMixture) -> dict:
    subcube = isinstance(model, SubcubeMixture)
    if subcube:
        marg = [[_SUBCUBE_STR[v] for v in row] for row in model.marginals.tolist()]
    else:
        marg = model.marginals.tolist()
    return {
        "schema_version": SCHEMA_VERSION,
        "n": model.n,
        "k": model.k,
        "weights": model.weights.tolist(),
        "marginals": marg,
        "subcube": subcube,
    }


def model_from_dict(data: dict) -> ProductMixture:
    try:
        n, k = int(data["n"]), int(data["k"])
        weights = data["weights"]
        marg = data["marginals"]
        subcube = bool(data["subcube"])
    except (KeyError, TypeError) as exc:
        raise InvalidModelError(f"malformed model file: {exc}") from exc
    if subcube:
        rows = []
        for row in marg:
            try:
                rows.append([_SUBCUBE_VAL[str(v)] for v in row])
            except KeyError as exc:
                raise InvalidModelError(f"bad subcube entry {exc}") from exc
        matrix = np.array(rows)
    else:
        matrix = np.array(marg, dtype=float)
    if matrix.shape != (n, k):
        raise InvalidModelError(f"marginals shape {matrix.shape} != ({n}, {k})")
    cls = SubcubeMixture if subcube else ProductMixture
    return cls(np.array(weights, dtype=float), matrix)


def write_model(path, model: ProductMixture) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def read_model(path) -> ProductMixture:
    return model_from_dict(json.loads(Path(path).read_text()))


def write_samples(path, samples: np.ndarray, labels: np.ndarray | None = None) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
    lines = []
    for i in range(samples.shape[0]):
        line = "".join(str(int(b)) for b in samples[i])
        if labels is not None:
            line += f"\t{int(labels[i])}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")


def read_samples(path) -> tuple[np.ndarray, np.ndarray | None]:
    rows = []
    labels: list[int] = []
    has_labels = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if has_labels is None:
            has_labels = len(parts) == 2
        if (len(parts) == 2) != has_labels:
            raise InvalidModelError("mixed labeled and unlabeled sample lines")
        bits = parts[0]
        if set(bits) - {"0", "1"}:
            raise InvalidModelError(f"bad sample line {line!r}")
        rows.append([int(c) for c in bits])
        if has_labels:
            labels.append(int(parts[1]))
    if not rows:
        raise InvalidModelError(f"no samples in {path}")
    xs = np.array(rows, dtype=np.uint8)
    return xs, (np.array(labels, dtype=np.uint8) if has_labels else None)


# --- stochastic decision trees ----------------------------------------------


def _sdt_node_to_dict(node) -> dict:
    if isinstance(node, SdtLeaf):
        return {"type": "leaf", "label": node.label}
    if isinstance(node, SdtDecision):
        return {
            "type": "decision",
            "var": node.var,
            "child0": _sdt_node_to_dict(node.child0),
            "child1": _sdt_node_to_dict(node.child1),
        }
    return {
        "type": "stochastic",
        "children": [[p, _sdt_node_to_dict(c)] for p, c in node.children],
    }


def _sdt_node_from_dict(data: dict):
    kind = data.get("type")
    if kind == "leaf":
        return SdtLeaf(int(data["label"]))
    if kind == "decision":
        return SdtDecision(
            int(data["var"]),
            _sdt_node_from_dict(data["child0"]),
            _sdt_node_from_dict(data["child1"]),
        )
    if kind == "stochastic":
        return SdtStochastic(
            tuple((float(p), _sdt_node_from_dict(c)) for p, c in data["children"])
        )
    raise InvalidModelError(f"unknown SDT node type {kind!r}")


def write_sdt(path, tree: StochasticDecisionTree) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n": tree.n,
        "root": _sdt_node_to_dict(tree.root),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_sdt(path) -> StochasticDecisionTree:
    data = json.loads(Path(path).read_text())
    return StochasticDecisionTree(n=int(data["n"]), root=_sdt_node_from_dict(data["root"]))


# --- sampling trees -----------------------------------------------------------


def _tree_node_to_dict(node) -> dict:
    if isinstance(node, TreeLeaf):
        return {
            "type": "leaf",
            "coords": list(node.coords),
            "dist": model_to_dict(node.dist),
        }
    return {
        "type": "node",
        "coords": list(node.coords),
        "branch": list(node.branch),
        "edges": [
            {"assignment": list(t), "weight": w, "child": _tree_node_to_dict(c)}
            for t, w, c in node.edges
        ],
    }


def _tree_node_from_dict(data: dict):
    if data["type"] == "leaf":
        return TreeLeaf(
            coords=tuple(int(c) for c in data["coords"]),
            dist=model_from_dict(data["dist"]),
        )
    return TreeNode(
        coords=tuple(int(c) for c in data["coords"]),
        branch=tuple(int(c) for c in data["branch"]),
        edges=tuple(
            (
                tuple(int(b) for b in e["assignment"]),
                float(e["weight"]),
                _tree_node_from_dict(e["child"]),
            )
            for e in data["edges"]
        ),
    )


def write_sampling_tree(path, tree: SamplingTree) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "n": tree.n,
        "root": _tree_node_to_dict(tree.root),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_sampling_tree(path) -> SamplingTree:
    data = json.loads(Path(path).read_text())
    return SamplingTree(n=int(data["n"]), root=_tree_node_from_dict(data["root"]))


def write_report(path, report: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **report}
    Path(path).write_text(json.dumps(payload, indent=1, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")
