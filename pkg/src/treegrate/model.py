"""Canonical tree-ensemble classifier model and its bit-exact JSON format.

Thresholds travel as binary32 bit patterns and leaf probabilities as binary64
bit patterns, serialized as hexadecimal strings.  Decimal text is never used
for floats on disk: it would perturb bits on round-trip and break the
differential checks that compare generated code against the interpreter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Union

from .flint import (
    NEG_ZERO_BITS,
    Op,
    bits_of_f32,
    bits_of_f64,
    f64_of_bits,
    is_nan_bits,
)

__all__ = [
    "FORMAT_VERSION",
    "PROB_SUM_TOL",
    "Branch",
    "Leaf",
    "Node",
    "Tree",
    "Ensemble",
    "FeatureVector",
    "Violation",
    "ModelError",
    "ModelParseError",
    "ModelSchemaError",
    "ModelValidationError",
    "validate",
    "load_model",
    "save_model",
]

FORMAT_VERSION = "treegrate-model/1"

# Training frameworks emit normalized doubles with rounding residue; exact
# sum-to-1 would reject real models.
PROB_SUM_TOL = 2.0**-20


class ModelError(Exception):
    """Base error for model documents that cannot be loaded."""


class ModelParseError(ModelError):
    """The document is not well-formed JSON."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ModelSchemaError(ModelError):
    """The JSON is well-formed but does not match the model schema."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ModelValidationError(ModelError):
    """The document parsed but the model violates structural invariants."""

    def __init__(self, violations: list["Violation"]):
        super().__init__(
            "invalid model: " + "; ".join(str(v) for v in violations)
        )
        self.violations = violations


@dataclass(frozen=True)
class Branch:
    """Internal node: compare one feature against a binary32 threshold.

    A missing feature value (NaN pattern) descends per ``default_left``.
    A -0.0 threshold is folded onto +0.0 at construction.
    """

    feature: int
    threshold_bits: int
    op: Op
    default_left: bool
    left: int
    right: int

    def __post_init__(self):
        if self.threshold_bits == NEG_ZERO_BITS:
            object.__setattr__(self, "threshold_bits", 0)


@dataclass(frozen=True)
class Leaf:
    """Terminal node holding one binary64 probability per class."""

    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(self.probs))


Node = Union[Branch, Leaf]


@dataclass(frozen=True)
class Tree:
    nodes: tuple[Node, ...]
    root: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class Ensemble:
    num_features: int
    num_classes: int
    trees: tuple[Tree, ...]
    feature_names: tuple[str, ...] | None = None
    model_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))


@dataclass(frozen=True)
class FeatureVector:
    """Input row: one binary32 bit pattern per feature; NaN patterns mean missing."""

    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    @classmethod
    def from_floats(cls, xs: Iterable[float]) -> "FeatureVector":
        """Narrow each value to binary32; NaN (missing) narrows to a NaN pattern."""
        return cls(tuple(bits_of_f32(x) for x in xs))

    def is_missing(self, index: int) -> bool:
        return is_nan_bits(self.values[index])


@dataclass(frozen=True)
class Violation:
    """One invariant violation, located by tree/node coordinates."""

    message: str
    tree: int | None = None
    node: int | None = None

    def __str__(self) -> str:
        where = []
        if self.tree is not None:
            where.append(f"tree {self.tree}")
        if self.node is not None:
            where.append(f"node {self.node}")
        prefix = " ".join(where)
        return f"{prefix}: {self.message}" if prefix else self.message


def validate(ensemble: Ensemble) -> list[Violation]:
    """Collect every invariant violation; an empty list means the model is valid.

    Total over structurally-typed input: reports problems as data instead of
    raising, including cyclic or unreachable node graphs.
    """
    out: list[Violation] = []
    if ensemble.num_features < 0:
        out.append(Violation(f"num_features {ensemble.num_features} is negative"))
    if ensemble.num_classes < 2:
        out.append(Violation(f"num_classes {ensemble.num_classes} < 2"))
    if not ensemble.trees:
        out.append(Violation("ensemble has no trees"))

    for t_idx, tree in enumerate(ensemble.trees):
        n_nodes = len(tree.nodes)
        if n_nodes == 0:
            out.append(Violation("tree has no nodes", tree=t_idx))
            continue
        if not 0 <= tree.root < n_nodes:
            out.append(Violation(f"root index {tree.root} out of range", tree=t_idx))
            continue

        for n_idx, node in enumerate(tree.nodes):
            if isinstance(node, Branch):
                if not 0 <= node.feature < ensemble.num_features:
                    out.append(
                        Violation(
                            f"feature index {node.feature} out of range "
                            f"[0, {ensemble.num_features})",
                            tree=t_idx,
                            node=n_idx,
                        )
                    )
                if not 0 <= node.threshold_bits <= 0xFFFF_FFFF:
                    out.append(
                        Violation(
                            f"threshold bits {node.threshold_bits:#x} not a 32-bit pattern",
                            tree=t_idx,
                            node=n_idx,
                        )
                    )
                elif is_nan_bits(node.threshold_bits):
                    out.append(
                        Violation("threshold encodes NaN", tree=t_idx, node=n_idx)
                    )
                elif node.threshold_bits == NEG_ZERO_BITS:
                    out.append(
                        Violation(
                            "threshold encodes -0.0 (must be canonicalized to +0.0)",
                            tree=t_idx,
                            node=n_idx,
                        )
                    )
            else:
                probs = node.probs
                if len(probs) != ensemble.num_classes:
                    out.append(
                        Violation(
                            f"leaf has {len(probs)} probabilities, expected "
                            f"{ensemble.num_classes}",
                            tree=t_idx,
                            node=n_idx,
                        )
                    )
                bad_range = [p for p in probs if not 0.0 <= p <= 1.0]
                if bad_range:
                    out.append(
                        Violation(
                            f"leaf probability {bad_range[0]!r} outside [0, 1]",
                            tree=t_idx,
                            node=n_idx,
                        )
                    )
                elif probs:
                    total = sum(probs)
                    if abs(total - 1.0) > PROB_SUM_TOL:
                        out.append(
                            Violation(
                                f"leaf probabilities sum {total!r} ≠ 1",
                                tree=t_idx,
                                node=n_idx,
                            )
                        )

        # Reachability: every node must be reached from the root exactly once.
        seen = [False] * n_nodes
        stack = [tree.root]
        while stack:
            i = stack.pop()
            if seen[i]:
                out.append(
                    Violation(
                        "node reachable more than once (cycle or shared subtree)",
                        tree=t_idx,
                        node=i,
                    )
                )
                continue
            seen[i] = True
            node = tree.nodes[i]
            if isinstance(node, Branch):
                for child in (node.left, node.right):
                    if not 0 <= child < n_nodes:
                        out.append(
                            Violation(
                                f"child index {child} out of range",
                                tree=t_idx,
                                node=i,
                            )
                        )
                    else:
                        stack.append(child)
        for n_idx, was_seen in enumerate(seen):
            if not was_seen:
                out.append(
                    Violation("node unreachable from root", tree=t_idx, node=n_idx)
                )

    return out


def _schema_error(message: str, path: str) -> ModelSchemaError:
    return ModelSchemaError(message, path)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise _schema_error("required field missing", f"{path}/{key}")
    return obj[key]


def _require_int(obj: dict, key: str, path: str) -> int:
    value = _require(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise _schema_error("expected an integer", f"{path}/{key}")
    return value


def _require_bool(obj: dict, key: str, path: str) -> bool:
    value = _require(obj, key, path)
    if not isinstance(value, bool):
        raise _schema_error("expected a boolean", f"{path}/{key}")
    return value


def _require_str(obj: dict, key: str, path: str) -> str:
    value = _require(obj, key, path)
    if not isinstance(value, str):
        raise _schema_error("expected a string", f"{path}/{key}")
    return value


def _require_list(obj: dict, key: str, path: str) -> list:
    value = _require(obj, key, path)
    if not isinstance(value, list):
        raise _schema_error("expected an array", f"{path}/{key}")
    return value


def _parse_hex_bits(text: str, digits: int, path: str) -> int:
    if (
        not isinstance(text, str)
        or len(text) != 2 + digits
        or not text.lower().startswith("0x")
    ):
        raise _schema_error(f"expected a 0x-prefixed {digits}-digit hex string", path)
    try:
        return int(text, 16)
    except ValueError:
        raise _schema_error(f"expected a 0x-prefixed {digits}-digit hex string", path)


def _parse_node(obj, path: str) -> Node:
    if not isinstance(obj, dict):
        raise _schema_error("expected an object", path)
    kind = _require_str(obj, "kind", path)
    if kind == "branch":
        threshold = _parse_hex_bits(
            _require(obj, "threshold", path), 8, f"{path}/threshold"
        )
        op_text = _require_str(obj, "op", path)
        if op_text not in ("le", "lt"):
            raise _schema_error('expected "le" or "lt"', f"{path}/op")
        return Branch(
            feature=_require_int(obj, "feature", path),
            threshold_bits=threshold,
            op=Op(op_text),
            default_left=_require_bool(obj, "default_left", path),
            left=_require_int(obj, "left", path),
            right=_require_int(obj, "right", path),
        )
    if kind == "leaf":
        probs_raw = _require_list(obj, "probs", path)
        probs = tuple(
            f64_of_bits(_parse_hex_bits(p, 16, f"{path}/probs/{i}"))
            for i, p in enumerate(probs_raw)
        )
        return Leaf(probs=probs)
    raise _schema_error('expected kind "branch" or "leaf"', f"{path}/kind")


def load_model(document: bytes | str) -> Ensemble:
    """Parse a canonical model document into a validated Ensemble.

    Raises ModelParseError (bad JSON, with byte offset), ModelSchemaError
    (wrong shape, naming the JSON path) or ModelValidationError (structural
    invariant violations).  Unknown keys are ignored for forward
    compatibility.
    """
    if isinstance(document, bytes):
        try:
            text = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelParseError("invalid UTF-8", exc.start) from exc
    else:
        text = document
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(exc.msg, exc.pos) from exc

    if not isinstance(obj, dict):
        raise _schema_error("expected a top-level object", "")
    version = _require_str(obj, "format_version", "")
    if version != FORMAT_VERSION:
        raise _schema_error(
            f'unsupported format_version {version!r} (expected "{FORMAT_VERSION}")',
            "/format_version",
        )
    model_id = _require_str(obj, "model_id", "")
    num_features = _require_int(obj, "num_features", "")
    num_classes = _require_int(obj, "num_classes", "")

    feature_names: tuple[str, ...] | None = None
    if "feature_names" in obj:
        names = obj["feature_names"]
        if not isinstance(names, list) or any(not isinstance(s, str) for s in names):
            raise _schema_error("expected an array of strings", "/feature_names")
        feature_names = tuple(names)

    trees_raw = _require_list(obj, "trees", "")
    trees = []
    for t_idx, tree_obj in enumerate(trees_raw):
        t_path = f"/trees/{t_idx}"
        if not isinstance(tree_obj, dict):
            raise _schema_error("expected an object", t_path)
        root = _require_int(tree_obj, "root", t_path)
        nodes_raw = _require_list(tree_obj, "nodes", t_path)
        nodes = tuple(
            _parse_node(node_obj, f"{t_path}/nodes/{n_idx}")
            for n_idx, node_obj in enumerate(nodes_raw)
        )
        trees.append(Tree(nodes=nodes, root=root))

    ensemble = Ensemble(
        num_features=num_features,
        num_classes=num_classes,
        trees=tuple(trees),
        feature_names=feature_names,
        model_id=model_id,
    )
    violations = validate(ensemble)
    if violations:
        raise ModelValidationError(violations)
    return ensemble


def save_model(ensemble: Ensemble) -> str:
    """Serialize a valid ensemble to deterministic canonical JSON text.

    load_model(save_model(e)) equals e structurally, including exact
    threshold bits and exact binary64 leaf probabilities.
    """
    doc: dict = {
        "format_version": FORMAT_VERSION,
        "model_id": ensemble.model_id,
        "num_features": ensemble.num_features,
        "num_classes": ensemble.num_classes,
    }
    if ensemble.feature_names is not None:
        doc["feature_names"] = list(ensemble.feature_names)
    doc["trees"] = [
        {
            "root": tree.root,
            "nodes": [_node_to_json(node) for node in tree.nodes],
        }
        for tree in ensemble.trees
    ]
    return json.dumps(doc, indent=2) + "\n"


def _node_to_json(node: Node) -> dict:
    if isinstance(node, Branch):
        return {
            "kind": "branch",
            "feature": node.feature,
            "threshold": f"0x{node.threshold_bits:08X}",
            "op": node.op.value,
            "default_left": node.default_left,
            "left": node.left,
            "right": node.right,
        }
    return {
        "kind": "leaf",
        "probs": [f"0x{bits_of_f64(p):016X}" for p in node.probs],
    }
