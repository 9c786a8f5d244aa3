"""treegrate: compile tree-ensemble classifiers into standalone integer-only C.

Pipeline: load a canonical model (``model``), reinterpret thresholds as
order-preserving integer keys (``flint``), convert leaf probabilities to
32-bit fixed-point increments (``quantize``), evaluate either semantics in
Python (``interp``), emit C99 (``codegen``), and cross-check everything
differentially (``verify``).
"""

from .codegen import EmitConfig, EmittedUnit, Mode, check_nonneg, emit, emit_harness
from .flint import Op, compare_as_int, flint_key, is_nan_bits
from .interp import (
    FloatAccumulators,
    IntAccumulators,
    eval_tree_float,
    predict_float,
    predict_int,
    probabilities_from_int,
)
from .model import (
    Branch,
    Ensemble,
    FeatureVector,
    Leaf,
    Tree,
    load_model,
    save_model,
    validate,
)
from .quantize import (
    PrecisionReport,
    QuantizedEnsemble,
    error_bound,
    quantize_ensemble,
    quantize_prob,
)
from .verify import (
    EnsembleSpec,
    FileInputs,
    UniformInputs,
    VerifyReport,
    random_ensemble,
    run_compiled_differential,
    run_differential,
)

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "EmitConfig",
    "EmittedUnit",
    "Ensemble",
    "EnsembleSpec",
    "FeatureVector",
    "FileInputs",
    "FloatAccumulators",
    "IntAccumulators",
    "Leaf",
    "Mode",
    "Op",
    "PrecisionReport",
    "QuantizedEnsemble",
    "Tree",
    "UniformInputs",
    "VerifyReport",
    "check_nonneg",
    "compare_as_int",
    "emit",
    "emit_harness",
    "error_bound",
    "eval_tree_float",
    "flint_key",
    "is_nan_bits",
    "load_model",
    "predict_float",
    "predict_int",
    "probabilities_from_int",
    "quantize_ensemble",
    "quantize_prob",
    "random_ensemble",
    "run_compiled_differential",
    "run_differential",
    "save_model",
    "validate",
    "__version__",
]
