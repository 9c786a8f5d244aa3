"""Differential verification of the integer inference path.

For every sample three quantities are computed: the exact rational ensemble
mean (arbitrary-precision over the binary64 leaf probabilities reached by IEEE
traversal), the binary32 float baseline, and the integer fixed-point path.
The report records how far the integer path strays from the exact mean
(always below n/2^32 for an n-tree model) and classifies argmax mismatches:
inside the provable 2n/2^32 near-tie window they are expected noise, outside
it they are bugs.

An optional external C toolchain closes the loop by compiling the emitted
code and comparing its accumulators bit-exactly against the interpreter.
"""

from __future__ import annotations

import dataclasses
import os
import random
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .codegen import EmitConfig, Mode, emit, emit_harness
from .flint import Op, bits_of_f32, f32_of_bits
from .interp import argmax_lowest, predict_float, predict_int
from .model import Branch, Ensemble, FeatureVector, Leaf, Tree
from .quantize import QuantizedEnsemble, quantize_ensemble

__all__ = [
    "EnsembleSpec",
    "UniformInputs",
    "FileInputs",
    "InputGen",
    "VerifyReport",
    "ToolchainError",
    "HarnessError",
    "random_ensemble",
    "generate_vectors",
    "read_vectors_file",
    "write_vectors_file",
    "run_differential",
    "run_compiled_differential",
    "find_toolchain",
]

QNAN_BITS = 0x7FC0_0000


class ToolchainError(RuntimeError):
    """The external compiler failed; the message carries its diagnostics."""


class HarnessError(RuntimeError):
    """Compiled harness output did not match the expected text format."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Shape of a synthetic random ensemble used for property testing."""

    num_features: int
    num_classes: int
    num_trees: int
    max_depth: int
    threshold_range: tuple[float, float] = (-100.0, 100.0)


@dataclass(frozen=True)
class UniformInputs:
    """Uniform feature generator, with NaN injection and exact-threshold hits."""

    low: float = -100.0
    high: float = 100.0
    nan_rate: float = 0.01
    boundary_rate: float = 0.05


@dataclass(frozen=True)
class FileInputs:
    path: Union[str, Path]


InputGen = Union[UniformInputs, FileInputs]


@dataclass(frozen=True)
class VerifyReport:
    samples: int
    n: int
    seed: int | None
    bound: Fraction
    max_abs_prob_diff: float
    mean_abs_prob_diff: float
    argmax_mismatches: int
    near_tie_mismatches: int
    hard_mismatches: int
    bound_holds: bool
    compiled_diff: int | None = None
    compiled_status: str | None = None

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "n": self.n,
            "seed": self.seed,
            "bound": float(self.bound),
            "bound_rational": f"{self.bound.numerator}/{self.bound.denominator}",
            "max_abs_prob_diff": self.max_abs_prob_diff,
            "mean_abs_prob_diff": self.mean_abs_prob_diff,
            "argmax_mismatches": self.argmax_mismatches,
            "near_tie_mismatches": self.near_tie_mismatches,
            "hard_mismatches": self.hard_mismatches,
            "bound_holds": self.bound_holds,
            "compiled_diff": self.compiled_diff,
            "compiled_status": self.compiled_status,
        }


def random_ensemble(spec: EnsembleSpec, seed: int) -> Ensemble:
    """Deterministic valid ensemble: random splits, normalized-uniform leaves."""
    rng = random.Random(seed)
    lo, hi = spec.threshold_range

    def make_leaf() -> Leaf:
        weights = [rng.random() for _ in range(spec.num_classes)]
        total = sum(weights)
        if total == 0.0:
            weights = [1.0] * spec.num_classes
            total = float(spec.num_classes)
        return Leaf(probs=tuple(w / total for w in weights))

    def build(nodes: list, depth: int) -> int:
        index = len(nodes)
        nodes.append(None)
        # Root stays a branch whenever depth allows, so generated models
        # always exercise comparisons; deeper nodes may stop early.
        if depth >= spec.max_depth or (depth > 0 and rng.random() < 0.25):
            nodes[index] = make_leaf()
            return index
        branch_kwargs = {
            "feature": rng.randrange(spec.num_features),
            "threshold_bits": bits_of_f32(rng.uniform(lo, hi)),
            "op": Op.LE if rng.random() < 0.5 else Op.LT,
            "default_left": rng.random() < 0.5,
        }
        left = build(nodes, depth + 1)
        right = build(nodes, depth + 1)
        nodes[index] = Branch(left=left, right=right, **branch_kwargs)
        return index

    trees = []
    for _ in range(spec.num_trees):
        nodes: list = []
        build(nodes, 0)
        trees.append(Tree(nodes=tuple(nodes), root=0))
    return Ensemble(
        num_features=spec.num_features,
        num_classes=spec.num_classes,
        trees=tuple(trees),
        model_id=f"random-seed{seed}-n{spec.num_trees}-d{spec.max_depth}",
    )


def generate_vectors(
    ensemble: Ensemble, count: int, seed: int, gen: UniformInputs
) -> list[FeatureVector]:
    """Deterministic pseudo-random inputs, including NaNs and boundary hits."""
    rng = random.Random(seed)
    thresholds = sorted(
        {
            f32_of_bits(node.threshold_bits)
            for tree in ensemble.trees
            for node in tree.nodes
            if isinstance(node, Branch)
        }
    )
    nf = ensemble.num_features
    boundary_cut = gen.nan_rate + (gen.boundary_rate if thresholds else 0.0)
    out = []
    for _ in range(count):
        words = []
        for _f in range(nf):
            r = rng.random()
            if r < gen.nan_rate:
                words.append(QNAN_BITS)
            elif r < boundary_cut:
                words.append(bits_of_f32(rng.choice(thresholds)))
            else:
                words.append(bits_of_f32(rng.uniform(gen.low, gen.high)))
        out.append(FeatureVector(values=tuple(words)))
    return out


def read_vectors_file(path: Union[str, Path], num_features: int) -> list[FeatureVector]:
    """Parse the vector text format: one row per line, decimal floats, ``nan`` = missing."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != num_features:
                raise ValueError(
                    f"{path}: line {line_no}: expected {num_features} values, "
                    f"got {len(tokens)}"
                )
            try:
                values = [float(tok) for tok in tokens]
            except ValueError:
                raise ValueError(
                    f"{path}: line {line_no}: not a decimal float row"
                ) from None
            out.append(FeatureVector.from_floats(values))
    return out


def write_vectors_file(path: Union[str, Path], vectors: Sequence[FeatureVector]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for v in vectors:
            handle.write(" ".join(repr(f32_of_bits(w)) for w in v.values) + "\n")


# ---------------------------------------------------------------------------
# Bulk evaluation.  The reference interpreter walks node objects one sample at
# a time; property sweeps need millions of tree traversals, so the same
# semantics are re-run here over numpy arrays.  Equivalence with the reference
# interpreter is itself covered by tests.
# ---------------------------------------------------------------------------


class _FlatTree:
    __slots__ = (
        "feat",
        "key",
        "thr",
        "le",
        "dl",
        "left",
        "right",
        "isleaf",
        "leafslot",
        "root",
        "depth",
        "incs",
        "probs_f32",
        "exact_cols",
    )


def _flatten(ensemble: Ensemble, q: QuantizedEnsemble, scale_exp: int) -> list[_FlatTree]:
    flat = []
    for tree, qtree in zip(ensemble.trees, q.trees):
        n_nodes = len(tree.nodes)
        ft = _FlatTree()
        ft.feat = np.zeros(n_nodes, dtype=np.int32)
        ft.key = np.zeros(n_nodes, dtype=np.int32)
        ft.thr = np.zeros(n_nodes, dtype=np.float32)
        ft.le = np.zeros(n_nodes, dtype=bool)
        ft.dl = np.zeros(n_nodes, dtype=bool)
        ft.left = np.zeros(n_nodes, dtype=np.int32)
        ft.right = np.zeros(n_nodes, dtype=np.int32)
        ft.isleaf = np.zeros(n_nodes, dtype=bool)
        ft.leafslot = np.zeros(n_nodes, dtype=np.int32)
        ft.root = tree.root
        incs = []
        probs = []
        exact_cols: list[list[int]] = [[] for _ in range(ensemble.num_classes)]
        for i, node in enumerate(tree.nodes):
            qnode = qtree.nodes[i]
            if isinstance(node, Branch):
                ft.feat[i] = node.feature
                ft.key[i] = qnode.key
                ft.thr[i] = np.float32(f32_of_bits(node.threshold_bits))
                ft.le[i] = node.op is Op.LE
                ft.dl[i] = node.default_left
                ft.left[i] = node.left
                ft.right[i] = node.right
            else:
                ft.isleaf[i] = True
                ft.leafslot[i] = len(incs)
                incs.append(qnode.increments)
                probs.append([np.float32(p) for p in node.probs])
                for c, p in enumerate(node.probs):
                    num, den = p.as_integer_ratio()
                    exact_cols[c].append(num << (scale_exp - (den.bit_length() - 1)))
        ft.incs = np.asarray(incs, dtype=np.int64)
        ft.probs_f32 = np.asarray(probs, dtype=np.float32)
        ft.exact_cols = [tuple(col) for col in exact_cols]
        # Longest root-to-leaf path bounds the vectorized walk.
        depth = 0
        stack = [(tree.root, 0)]
        while stack:
            i, d = stack.pop()
            node = tree.nodes[i]
            if isinstance(node, Branch):
                stack.append((node.left, d + 1))
                stack.append((node.right, d + 1))
            else:
                depth = max(depth, d)
        ft.depth = depth
        flat.append(ft)
    return flat


def _exact_scale_exp(ensemble: Ensemble) -> int:
    """Common power-of-two denominator exponent for all leaf probabilities."""
    scale = 0
    for tree in ensemble.trees:
        for node in tree.nodes:
            if isinstance(node, Leaf):
                for p in node.probs:
                    scale = max(scale, p.as_integer_ratio()[1].bit_length() - 1)
    return scale


def _key_matrix(words: np.ndarray) -> np.ndarray:
    w = np.where(words == np.uint32(0x80000000), np.uint32(0), words)
    neg = w >= np.uint32(0x80000000)
    return np.where(neg, w ^ np.uint32(0x7FFFFFFF), w).astype(np.uint32).view(np.int32)


def _nan_matrix(words: np.ndarray) -> np.ndarray:
    return ((words & np.uint32(0x7F800000)) == np.uint32(0x7F800000)) & (
        (words & np.uint32(0x007FFFFF)) != np.uint32(0)
    )


def _walk_int(ft: _FlatTree, keys: np.ndarray, nans: np.ndarray, rows: np.ndarray) -> np.ndarray:
    cur = np.full(rows.shape[0], ft.root, dtype=np.int32)
    for _ in range(ft.depth):
        f = ft.feat[cur]
        kv = keys[rows, f]
        tk = ft.key[cur]
        cmp = np.where(ft.le[cur], kv <= tk, kv < tk)
        go_left = np.where(nans[rows, f], ft.dl[cur], cmp)
        nxt = np.where(go_left, ft.left[cur], ft.right[cur])
        cur = np.where(ft.isleaf[cur], cur, nxt)
    return ft.leafslot[cur]


def _walk_float(ft: _FlatTree, floats: np.ndarray, nans: np.ndarray, rows: np.ndarray) -> np.ndarray:
    cur = np.full(rows.shape[0], ft.root, dtype=np.int32)
    for _ in range(ft.depth):
        f = ft.feat[cur]
        xv = floats[rows, f]
        tv = ft.thr[cur]
        cmp = np.where(ft.le[cur], xv <= tv, xv < tv)
        go_left = np.where(nans[rows, f], ft.dl[cur], cmp)
        nxt = np.where(go_left, ft.left[cur], ft.right[cur])
        cur = np.where(ft.isleaf[cur], cur, nxt)
    return ft.leafslot[cur]


def _bulk_eval(
    ensemble: Ensemble, q: QuantizedEnsemble, words: np.ndarray
) -> tuple[np.ndarray, np.ndarray, list[list[int]], int]:
    """Evaluate all samples: integer accumulators, binary32 sums, exact numerators.

    ``words`` is an (S, F) uint32 matrix.  Returns (int_acc int64 S*C,
    float_sums float32 S*C, exact numerator columns per class over the common
    denominator 2**scale_exp, scale_exp).
    """
    samples = words.shape[0]
    classes = ensemble.num_classes
    scale_exp = _exact_scale_exp(ensemble)
    flat = _flatten(ensemble, q, scale_exp)
    rows = np.arange(samples)
    keys = _key_matrix(words)
    nans = _nan_matrix(words)
    floats = words.view(np.float32) if words.size else words.astype(np.float32)

    int_acc = np.zeros((samples, classes), dtype=np.int64)
    float_sums = np.zeros((samples, classes), dtype=np.float32)
    exact_cols: list[list[int]] = [[0] * samples for _ in range(classes)]

    for ft in flat:
        leaf_int = _walk_int(ft, keys, nans, rows)
        leaf_flt = _walk_float(ft, floats, nans, rows)
        int_acc += ft.incs[leaf_int]
        float_sums += ft.probs_f32[leaf_flt]
        lf = leaf_flt.tolist()
        for c in range(classes):
            tc = ft.exact_cols[c]
            col = exact_cols[c]
            col[:] = [a + tc[l] for a, l in zip(col, lf)]
    return int_acc, float_sums, exact_cols, scale_exp


def _diff_chunk(args) -> tuple:
    ensemble, q, words = args
    int_acc, _float_sums, exact_cols, scale_exp = _bulk_eval(ensemble, q, words)
    samples = words.shape[0]
    classes = ensemble.num_classes
    n = q.num_trees

    # |acc/2^32 - exact/(n*2^K)| compared through the common denominator
    # n * 2^K * 2^32; every comparison below is exact integer arithmetic.
    acc_scale = n << scale_exp
    max_diff = 0
    sum_diff = 0
    acc_list = int_acc.tolist()
    for c in range(classes):
        col = exact_cols[c]
        for s in range(samples):
            d = (col[s] << 32) - acc_list[s][c] * acc_scale
            if d < 0:
                d = -d
            sum_diff += d
            if d > max_diff:
                max_diff = d

    int_argmax = np.argmax(int_acc, axis=1).tolist()
    mism = 0
    near = 0
    hard = 0
    near_tie_limit = (2 * n * n) << scale_exp  # margin*2^32 < 2n^2*2^K
    for s, exact_row in enumerate(zip(*exact_cols)):
        ea = argmax_lowest(exact_row)
        if ea == int_argmax[s]:
            continue
        mism += 1
        top = sorted(exact_row)
        margin = top[-1] - top[-2]
        if (margin << 32) < near_tie_limit:
            near += 1
        else:
            hard += 1
    return samples, classes, max_diff, sum_diff, mism, near, hard


def _vectors_to_words(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors or not vectors[0].values:
        return np.zeros((len(vectors), 0), dtype=np.uint32)
    return np.array([v.values for v in vectors], dtype=np.uint32)


def _resolve_inputs(
    ensemble: Ensemble, sample_count: int, seed: int, input_gen: InputGen
) -> list[FeatureVector]:
    if isinstance(input_gen, FileInputs):
        vectors = read_vectors_file(input_gen.path, ensemble.num_features)
        if not vectors:
            raise ValueError(f"{input_gen.path}: no input vectors")
        return vectors[:sample_count] if sample_count else vectors
    return generate_vectors(ensemble, sample_count, seed, input_gen)


def run_differential(
    ensemble: Ensemble,
    sample_count: int,
    seed: int,
    input_gen: InputGen = UniformInputs(),
    jobs: int = 1,
) -> VerifyReport:
    """Exact-vs-integer differential over deterministic pseudo-random inputs."""
    if sample_count < 1 and not isinstance(input_gen, FileInputs):
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    q, _precision = quantize_ensemble(ensemble)
    vectors = _resolve_inputs(ensemble, sample_count, seed, input_gen)
    words = _vectors_to_words(vectors)

    if jobs > 1 and words.shape[0] > 1:
        chunk = (words.shape[0] + jobs - 1) // jobs
        payloads = [
            (ensemble, q, words[i : i + chunk])
            for i in range(0, words.shape[0], chunk)
        ]
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(_diff_chunk, payloads))
    else:
        partials = [_diff_chunk((ensemble, q, words))]

    samples = sum(p[0] for p in partials)
    classes = ensemble.num_classes
    max_diff = max(p[2] for p in partials)
    sum_diff = sum(p[3] for p in partials)
    mism = sum(p[4] for p in partials)
    near = sum(p[5] for p in partials)
    hard = sum(p[6] for p in partials)

    n = q.num_trees
    scale_exp = _exact_scale_exp(ensemble)
    denom = (n << scale_exp) << 32
    bound = Fraction(n, 1 << 32)
    return VerifyReport(
        samples=samples,
        n=n,
        seed=seed,
        bound=bound,
        max_abs_prob_diff=float(Fraction(max_diff, denom)),
        mean_abs_prob_diff=float(Fraction(sum_diff, denom * samples * classes)),
        argmax_mismatches=mism,
        near_tie_mismatches=near,
        hard_mismatches=hard,
        bound_holds=Fraction(max_diff, denom) < bound,
    )


def find_toolchain() -> list[str] | None:
    """C compiler command from $TREEGRATE_CC or the usual PATH names."""
    env = os.environ.get("TREEGRATE_CC")
    if env:
        argv = shlex.split(env)
        return argv if argv and shutil.which(argv[0]) else None
    for name in ("cc", "gcc", "clang"):
        if shutil.which(name):
            return [name]
    return None


def run_compiled_differential(
    ensemble: Ensemble,
    cfg: EmitConfig,
    toolchain: Union[Sequence[str], str, None],
    sample_count: int,
    seed: int,
    input_gen: InputGen = UniformInputs(),
    jobs: int = 1,
) -> VerifyReport:
    """run_differential plus a bit-exact comparison against compiled output.

    A missing toolchain marks the compiled section "skipped" without failing;
    compile errors raise ToolchainError with the captured diagnostics and
    unparseable harness output raises HarnessError.
    """
    base = run_differential(ensemble, sample_count, seed, input_gen, jobs=jobs)

    if isinstance(toolchain, str):
        argv = shlex.split(toolchain)
    elif toolchain is not None:
        argv = list(toolchain)
    else:
        argv = []
    if not argv or shutil.which(argv[0]) is None:
        return dataclasses.replace(base, compiled_diff=None, compiled_status="skipped")

    vectors = _resolve_inputs(ensemble, sample_count, seed, input_gen)
    unit = emit(ensemble, cfg)
    harness = emit_harness(ensemble, cfg, vectors)

    with tempfile.TemporaryDirectory(prefix="treegrate-") as tmp:
        tmp_path = Path(tmp)
        (tmp_path / "predictor.c").write_text(unit.source_text, encoding="utf-8")
        (tmp_path / "harness.c").write_text(harness, encoding="utf-8")
        binary = tmp_path / "harness"
        compile_cmd = argv + [
            "-std=c99",
            "-O2",
            "-o",
            str(binary),
            str(tmp_path / "predictor.c"),
            str(tmp_path / "harness.c"),
        ]
        proc = subprocess.run(compile_cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ToolchainError(
                f"{' '.join(compile_cmd)} failed:\n{proc.stderr.strip()}"
            )
        run = subprocess.run([str(binary)], capture_output=True, text=True)
        if run.returncode != 0:
            raise HarnessError(f"harness exited {run.returncode}: {run.stderr.strip()}")
        lines = run.stdout.splitlines()

    if len(lines) != len(vectors):
        raise HarnessError(
            f"harness printed {len(lines)} lines for {len(vectors)} vectors"
        )

    q, _ = quantize_ensemble(ensemble)
    mismatches = 0
    for line, vector in zip(lines, vectors):
        tokens = line.split()
        if len(tokens) != ensemble.num_classes:
            raise HarnessError(f"bad harness line: {line!r}")
        if cfg.mode is Mode.INTEGER:
            try:
                got = tuple(int(tok) for tok in tokens)
            except ValueError:
                raise HarnessError(f"bad harness line: {line!r}") from None
            expected = predict_int(q, vector)[0].sums
            if got != expected:
                mismatches += 1
        else:
            try:
                got_bits = tuple(bits_of_f32(float(tok)) for tok in tokens)
            except ValueError:
                raise HarnessError(f"bad harness line: {line!r}") from None
            sums = predict_float(ensemble, vector)[0].sums
            expected_bits = tuple(bits_of_f32(s) for s in sums)
            if got_bits != expected_bits:
                mismatches += 1

    return dataclasses.replace(base, compiled_diff=mismatches, compiled_status="ok")
