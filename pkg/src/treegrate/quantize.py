"""Fixed-point conversion of leaf probabilities to 32-bit unsigned increments.

Each probability p becomes floor(p * 2^32 / n) for an n-tree ensemble, so
summing one increment per tree keeps every per-class accumulator inside 32
bits while representing the ensemble-mean probability with resolution n/2^32.
The floor is taken once, on the exact rational p * 2^32 / n; no floating-point
multiplication is involved, so results are bit-reproducible everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .flint import Op, flint_key
from .model import Branch, Ensemble, Leaf

__all__ = [
    "SCALE",
    "LOW_PROB_THRESHOLD",
    "TREE_COUNT_PRECISION_CROSSOVER",
    "QBranch",
    "QLeaf",
    "QTree",
    "QuantizedEnsemble",
    "PrecisionReport",
    "quantize_prob",
    "quantize_ensemble",
    "error_bound",
]

SCALE = 2**32

# Below ~0.001 a binary32 float would carry more precision than the
# fixed-point encoding; flagged as advisory only.
LOW_PROB_THRESHOLD = 2.0**-10

# Beyond 256 trees the fixed-point resolution n/2^32 is coarser than
# binary32's 2^-24; also advisory.
TREE_COUNT_PRECISION_CROSSOVER = 256


@dataclass(frozen=True)
class QBranch:
    feature: int
    key: int
    op: Op
    default_left: bool
    left: int
    right: int


@dataclass(frozen=True)
class QLeaf:
    increments: tuple[int, ...]


@dataclass(frozen=True)
class QTree:
    nodes: tuple[QBranch | QLeaf, ...]
    root: int = 0


@dataclass(frozen=True)
class QuantizedEnsemble:
    num_features: int
    num_classes: int
    num_trees: int
    trees: tuple[QTree, ...]
    model_id: str = ""


@dataclass(frozen=True)
class PrecisionReport:
    """Advisory precision accounting for a quantized ensemble.

    ``low_prob_leaves`` counts nonzero leaf probabilities below 2^-10; exact
    zeros quantize exactly and are not counted.
    """

    n: int
    bound: Fraction
    warn_tree_count: bool
    low_prob_leaves: int


def quantize_prob(p: float, n: int) -> int:
    """floor(p * 2^32 / n), clamped to floor((2^32 - 1) / n).

    The floor is computed exactly from p's binary64 significand.  The clamp
    only engages at p == 1 with small n, where the unclamped value would not
    fit 32 bits; it guarantees that any n increments sum to at most 2^32 - 1.
    """
    if n < 1:
        raise ValueError(f"tree count must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {p!r}")
    num, den = p.as_integer_ratio()  # den is a power of two; exact
    value = (num << 32) // (den * n)
    limit = (SCALE - 1) // n
    return value if value < limit else limit


def quantize_ensemble(ensemble: Ensemble) -> tuple[QuantizedEnsemble, PrecisionReport]:
    """Quantize every leaf and key-transform every threshold of a valid ensemble."""
    n = len(ensemble.trees)
    if n < 1:
        raise ValueError("ensemble has no trees")
    low_prob = 0
    qtrees = []
    for tree in ensemble.trees:
        qnodes: list[QBranch | QLeaf] = []
        for node in tree.nodes:
            if isinstance(node, Branch):
                qnodes.append(
                    QBranch(
                        feature=node.feature,
                        key=flint_key(node.threshold_bits),
                        op=node.op,
                        default_left=node.default_left,
                        left=node.left,
                        right=node.right,
                    )
                )
            else:
                low_prob += sum(1 for p in node.probs if 0.0 < p < LOW_PROB_THRESHOLD)
                qnodes.append(
                    QLeaf(increments=tuple(quantize_prob(p, n) for p in node.probs))
                )
        qtrees.append(QTree(nodes=tuple(qnodes), root=tree.root))

    report = PrecisionReport(
        n=n,
        bound=error_bound(n),
        warn_tree_count=n > TREE_COUNT_PRECISION_CROSSOVER,
        low_prob_leaves=low_prob,
    )
    quantized = QuantizedEnsemble(
        num_features=ensemble.num_features,
        num_classes=ensemble.num_classes,
        num_trees=n,
        trees=tuple(qtrees),
        model_id=ensemble.model_id,
    )
    return quantized, report


def error_bound(n: int) -> Fraction:
    """n / 2^32: bounds |exact mean probability - fixed-point probability|.

    Each of the n leaf contributions loses strictly less than one scaled unit
    to flooring.
    """
    if n < 1:
        raise ValueError(f"tree count must be >= 1, got {n}")
    return Fraction(n, SCALE)
