from __future__ import annotations

import numpy as np
import pytest

from treegrate.flint import Op, bits_of_f32
from treegrate.model import Branch, Ensemble, FeatureVector, Leaf, Tree
from treegrate.verify import find_toolchain


def leaf_only_ensemble(probs, num_trees=1, num_features=1, model_id="leafy"):
    """Ensemble whose trees are all a single identical leaf."""
    tree = Tree(nodes=(Leaf(probs=tuple(probs)),), root=0)
    return Ensemble(
        num_features=num_features,
        num_classes=len(probs),
        trees=(tree,) * num_trees,
        model_id=model_id,
    )


def depth1_ensemble(
    threshold=87.5,
    op=Op.LE,
    default_left=True,
    left_probs=(1.0, 0.0),
    right_probs=(0.0, 1.0),
    num_trees=1,
):
    """One-feature, one-split trees: x0 <op> threshold -> left leaf, else right."""
    tree = Tree(
        nodes=(
            Branch(
                feature=0,
                threshold_bits=bits_of_f32(threshold),
                op=op,
                default_left=default_left,
                left=1,
                right=2,
            ),
            Leaf(probs=tuple(left_probs)),
            Leaf(probs=tuple(right_probs)),
        ),
        root=0,
    )
    return Ensemble(
        num_features=1,
        num_classes=len(left_probs),
        trees=(tree,) * num_trees,
        model_id="depth1",
    )


def vec(*values) -> FeatureVector:
    return FeatureVector.from_floats(values)


def float_order_chain(step: int) -> np.ndarray:
    """All non-NaN binary32 bit patterns sampled with ``step``, in strictly
    ascending float order, with the boundary patterns always included.

    -0.0 is excluded (it ties with +0.0 and is checked separately).
    """
    neg = np.arange(0xFF800000, 0x80000000, -step, dtype=np.int64)
    neg = np.unique(
        np.concatenate([neg, np.array([0xFF800000, 0xFF7FFFFF, 0x80000001])])
    )[::-1]
    pos = np.arange(0x00000000, 0x7F800001, step, dtype=np.int64)
    pos = np.unique(
        np.concatenate([pos, np.array([0x00000000, 0x00000001, 0x7F7FFFFF, 0x7F800000])])
    )
    return np.concatenate([neg, pos]).astype(np.uint32)


@pytest.fixture(scope="session")
def toolchain():
    tc = find_toolchain()
    if tc is None:
        pytest.skip("no C toolchain available")
    return tc
