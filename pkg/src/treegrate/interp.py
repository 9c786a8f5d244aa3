"""Reference evaluators with float and integer semantics.

The float path mirrors the generated float baseline exactly: binary32
accumulators, one ``acc += (float)p`` per class per tree, in tree order.  It
also carries exact rational per-class sums so error bounds can be checked
against arbitrary-precision arithmetic rather than against the (itself
rounded) binary32 sums.

The integer path is step-equivalent to the generated integer code: the same
traversal decided by integer key comparisons, the same 32-bit unsigned
increment additions, in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .flint import Op, f32_of_bits, f32_round, flint_key, is_nan_bits
from .model import Branch, Ensemble, FeatureVector, Leaf, Tree
from .quantize import QBranch, QLeaf, QTree, QuantizedEnsemble, SCALE

__all__ = [
    "FloatAccumulators",
    "IntAccumulators",
    "argmax_lowest",
    "eval_tree_float",
    "tree_path_float",
    "tree_path_int",
    "predict_float",
    "predict_int",
    "probabilities_from_int",
]


@dataclass(frozen=True)
class FloatAccumulators:
    """Per-class binary32 sums plus the exact rational sums of the same leaves."""

    sums: tuple[float, ...]
    exact: tuple[Fraction, ...]


@dataclass(frozen=True)
class IntAccumulators:
    """Per-class 32-bit unsigned fixed-point sums."""

    sums: tuple[int, ...]


def argmax_lowest(values: Sequence) -> int:
    """Index of the largest value, ties broken toward the lowest index."""
    best = 0
    best_value = values[0]
    for i in range(1, len(values)):
        if values[i] > best_value:
            best = i
            best_value = values[i]
    return best


def eval_tree_float(tree: Tree, x: FeatureVector) -> Leaf:
    """Walk one tree under IEEE float semantics and return the reached leaf."""
    words = x.values
    node = tree.nodes[tree.root]
    while isinstance(node, Branch):
        bits = words[node.feature]
        if is_nan_bits(bits):
            go_left = node.default_left
        else:
            value = f32_of_bits(bits)
            threshold = f32_of_bits(node.threshold_bits)
            go_left = value <= threshold if node.op is Op.LE else value < threshold
        node = tree.nodes[node.left if go_left else node.right]
    return node


def tree_path_float(tree: Tree, x: FeatureVector) -> list[int]:
    """Node indices visited by the float-semantics walk, root to leaf."""
    words = x.values
    i = tree.root
    path = [i]
    node = tree.nodes[i]
    while isinstance(node, Branch):
        bits = words[node.feature]
        if is_nan_bits(bits):
            go_left = node.default_left
        else:
            value = f32_of_bits(bits)
            threshold = f32_of_bits(node.threshold_bits)
            go_left = value <= threshold if node.op is Op.LE else value < threshold
        i = node.left if go_left else node.right
        path.append(i)
        node = tree.nodes[i]
    return path


def _eval_tree_int(qtree: QTree, words: tuple[int, ...], key_cache: list) -> QLeaf:
    node = qtree.nodes[qtree.root]
    while isinstance(node, QBranch):
        f = node.feature
        bits = words[f]
        if is_nan_bits(bits):
            go_left = node.default_left
        else:
            key = key_cache[f]
            if key is None:
                key = flint_key(bits)
                key_cache[f] = key
            go_left = key <= node.key if node.op is Op.LE else key < node.key
        node = qtree.nodes[node.left if go_left else node.right]
    return node


def tree_path_int(qtree: QTree, x: FeatureVector) -> list[int]:
    """Node indices visited by the integer-semantics walk, root to leaf."""
    words = x.values
    i = qtree.root
    path = [i]
    node = qtree.nodes[i]
    while isinstance(node, QBranch):
        bits = words[node.feature]
        if is_nan_bits(bits):
            go_left = node.default_left
        else:
            key = flint_key(bits)
            go_left = key <= node.key if node.op is Op.LE else key < node.key
        i = node.left if go_left else node.right
        path.append(i)
        node = qtree.nodes[i]
    return path


def predict_float(ensemble: Ensemble, x: FeatureVector) -> tuple[FloatAccumulators, int]:
    """Binary32 ensemble sums and the argmax class (ties toward lowest index).

    Final probabilities are ``sums[c] / n``.  The parallel ``exact`` sums
    accumulate the binary64 leaf probabilities without rounding.
    """
    if len(x.values) != ensemble.num_features:
        raise ValueError(
            f"feature vector has {len(x.values)} values, model expects "
            f"{ensemble.num_features}"
        )
    num_classes = ensemble.num_classes
    sums = [0.0] * num_classes
    # Exact sums kept as integers over a running power-of-two denominator.
    exact_num = [0] * num_classes
    exact_exp = 0
    for tree in ensemble.trees:
        leaf = eval_tree_float(tree, x)
        for c in range(num_classes):
            sums[c] = f32_round(sums[c] + f32_round(leaf.probs[c]))
            num, den = leaf.probs[c].as_integer_ratio()
            k = den.bit_length() - 1
            if k > exact_exp:
                shift = k - exact_exp
                for j in range(num_classes):
                    exact_num[j] <<= shift
                exact_exp = k
            exact_num[c] += num << (exact_exp - k)
    acc = FloatAccumulators(
        sums=tuple(sums),
        exact=tuple(Fraction(m, 1 << exact_exp) for m in exact_num),
    )
    return acc, argmax_lowest(acc.sums)


def predict_int(q: QuantizedEnsemble, x: FeatureVector) -> tuple[IntAccumulators, int]:
    """Integer-semantics prediction, step-equivalent to the generated integer code.

    Walks every tree with integer key comparisons, adds the leaf increments in
    class-index order, and never overflows 32 bits (guaranteed by the
    quantizer's clamp).
    """
    if len(x.values) != q.num_features:
        raise ValueError(
            f"feature vector has {len(x.values)} values, model expects "
            f"{q.num_features}"
        )
    words = x.values
    sums = [0] * q.num_classes
    key_cache: list = [None] * q.num_features
    for qtree in q.trees:
        leaf = _eval_tree_int(qtree, words, key_cache)
        for c in range(q.num_classes):
            sums[c] += leaf.increments[c]
    acc = IntAccumulators(sums=tuple(sums))
    return acc, argmax_lowest(acc.sums)


def probabilities_from_int(acc: IntAccumulators) -> tuple[float, ...]:
    """Fixed-point accumulators scaled back to probabilities: acc[c] / 2^32."""
    return tuple(v / SCALE for v in acc.sums)
