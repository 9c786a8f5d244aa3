"""Serialize fitted scikit-learn forest classifiers to treegrate model JSON.

The target format stores binary32 thresholds, but scikit-learn trains binary64
ones and evaluates ``float32(x) <= float64(t)``.  Rounding the threshold to
the *nearest* binary32 can flip decisions for inputs between ``t`` and that
neighbor, so thresholds are narrowed toward negative infinity instead: the
exported comparison ``x <= largest_binary32_at_most(t)`` decides identically
to the source framework for every binary32 input ``x``.  Strict comparisons
are normalized to ``le`` against the largest binary32 strictly below the
threshold, which preserves decisions the same way.

Only binary32-valued inputs are covered by this guarantee; the downstream
inference code takes 32-bit words, so wider inputs are out of contract by
construction.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

__all__ = [
    "ExportError",
    "UnsupportedModelError",
    "ExportedModel",
    "narrow_threshold",
    "export_forest",
]

FORMAT_VERSION = "treegrate-model/1"

_PACK_F32 = struct.Struct("<f")
_PACK_U32 = struct.Struct("<I")
_PACK_F64 = struct.Struct("<d")
_PACK_U64 = struct.Struct("<Q")

_POS_INF_BITS = 0x7F80_0000
_NEG_INF_BITS = 0xFF80_0000


class ExportError(Exception):
    """The model object cannot be exported."""


class UnsupportedModelError(ExportError):
    """The model is not a classification forest with probability leaves."""


@dataclass(frozen=True)
class ExportedModel:
    """Canonical model document plus an informational provenance block."""

    document: dict

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2) + "\n"


def _bits_of_f32(value: float) -> int:
    try:
        return _PACK_U32.unpack(_PACK_F32.pack(value))[0]
    except OverflowError:
        return _NEG_INF_BITS if value < 0 else _POS_INF_BITS


def _f32_of_bits(bits: int) -> float:
    return _PACK_F32.unpack(_PACK_U32.pack(bits))[0]


def _hex_f64(value: float) -> str:
    return f"0x{_PACK_U64.unpack(_PACK_F64.pack(value))[0]:016X}"


def _next_down_bits(bits: int) -> int:
    """Bit pattern of the largest binary32 strictly below the given value."""
    if bits in (0x0000_0000, 0x8000_0000):
        return 0x8000_0001  # below +-0 comes the smallest negative subnormal
    if bits & 0x8000_0000:
        return bits + 1  # negative: away from zero
    return bits - 1  # positive: toward zero


def narrow_threshold(t: float, op: str = "le") -> tuple[int, str]:
    """Binary32 bit pattern and operator preserving the binary64 decision.

    For ``le``: the largest binary32 ``r`` with ``r <= t``; for any binary32
    ``x``, ``x <= t`` exactly when ``x <= r``.  For ``lt``: the largest
    binary32 strictly below ``t``, with the operator normalized to ``le``;
    ``x < t`` exactly when ``x <= r``.
    """
    if op not in ("le", "lt"):
        raise ValueError(f"unsupported comparison op: {op!r}")
    if not math.isfinite(t):
        raise ValueError(f"threshold must be finite, got {t!r}")
    bits = _bits_of_f32(t)  # nearest; may overshoot or round to infinity
    value = _f32_of_bits(bits)
    if op == "le":
        if value > t:
            bits = _next_down_bits(bits)
    else:
        if value >= t:
            bits = _next_down_bits(bits)
    if bits == 0x8000_0000:  # -0.0 compares like +0.0; keep the canonical form
        bits = 0
    return bits, "le"


def _check_fitted_forest(forest) -> None:
    if not hasattr(forest, "estimators_"):
        raise ExportError(
            "model has no fitted estimators_: train it before exporting"
        )
    if getattr(forest, "_estimator_type", None) != "classifier":
        raise UnsupportedModelError(
            "only classification forests with probability leaves are supported"
        )


def _tree_nodes(tree, num_classes: int) -> list[dict]:
    import numpy as np

    left = tree.children_left
    right = tree.children_right
    feature = tree.feature
    threshold = tree.threshold
    value = tree.value
    missing_left = getattr(tree, "missing_go_to_left", None)
    if missing_left is None:
        missing_left = np.zeros(tree.node_count, dtype=bool)

    nodes = []
    for i in range(tree.node_count):
        if left[i] == -1:  # leaf
            row = np.asarray(value[i][0], dtype=float)
            total = float(row.sum())
            if total <= 0.0:
                raise ExportError(f"leaf node {i} has non-positive class weight")
            probs = [float(w) / total for w in row]
            if len(probs) != num_classes:
                raise UnsupportedModelError(
                    f"leaf node {i} carries {len(probs)} outputs, expected "
                    f"{num_classes} class probabilities"
                )
            nodes.append({"kind": "leaf", "probs": [_hex_f64(p) for p in probs]})
        else:
            bits, op = narrow_threshold(float(threshold[i]), "le")
            nodes.append(
                {
                    "kind": "branch",
                    "feature": int(feature[i]),
                    "threshold": f"0x{bits:08X}",
                    "op": op,
                    "default_left": bool(missing_left[i]),
                    "left": int(left[i]),
                    "right": int(right[i]),
                }
            )
    return nodes


def export_forest(forest, model_id: str | None = None) -> ExportedModel:
    """Export a fitted scikit-learn forest classifier bit-exactly.

    Raises ExportError for unfitted models and UnsupportedModelError for
    regressors and multi-output classifiers.
    """
    _check_fitted_forest(forest)
    if getattr(forest, "n_outputs_", 1) != 1:
        raise UnsupportedModelError("multi-output classifiers are not supported")
    num_classes = int(forest.n_classes_)
    if num_classes < 2:
        raise UnsupportedModelError(
            f"{num_classes}-class model: the target format requires >= 2 classes"
        )
    num_features = int(forest.n_features_in_)
    import sklearn

    trees = [
        {"root": 0, "nodes": _tree_nodes(est.tree_, num_classes)}
        for est in forest.estimators_
    ]
    params = {
        k: v
        for k, v in forest.get_params().items()
        if isinstance(v, (int, float, str, bool, type(None)))
    }
    document = {
        "format_version": FORMAT_VERSION,
        "model_id": model_id
        or f"sklearn-{type(forest).__name__}-{len(trees)}trees",
        "num_features": num_features,
        "num_classes": num_classes,
        "trees": trees,
        "provenance": {
            "framework": "scikit-learn",
            "framework_version": sklearn.__version__,
            "class_labels": [str(c) for c in forest.classes_],
            "training_parameters": params,
        },
    }
    return ExportedModel(document=document)
