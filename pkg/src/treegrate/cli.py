"""Command-line pipeline: compile, predict, verify, inspect.

Exit codes are a stable contract: 0 success, 1 verification failure,
2 input/model error, 3 I/O or environment error.  Diagnostics go to stderr;
machine-readable output goes to stdout.  Output files are written atomically
(temporary file plus rename) or not at all.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .codegen import ConfigError, EmitConfig, Mode, check_nonneg, emit, emit_harness
from .flint import f32_of_bits
from .interp import predict_float, predict_int, probabilities_from_int
from .model import Branch, Ensemble, ModelError, Tree, load_model
from .quantize import (
    TREE_COUNT_PRECISION_CROSSOVER,
    PrecisionReport,
    quantize_ensemble,
)
from .verify import (
    FileInputs,
    HarnessError,
    ToolchainError,
    UniformInputs,
    read_vectors_file,
    run_compiled_differential,
    run_differential,
)

__all__ = ["main"]


def _err(message: str) -> None:
    print(f"treegrate: {message}", file=sys.stderr)


def _load(path: str) -> Ensemble:
    with open(path, "rb") as handle:
        return load_model(handle.read())


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=".treegrate-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _print_precision_warnings(report: PrecisionReport) -> None:
    if report.warn_tree_count:
        _err(
            f"warning: {report.n} trees exceeds the {TREE_COUNT_PRECISION_CROSSOVER}-tree "
            f"precision crossover; fixed-point resolution n/2^32 is now coarser than "
            f"binary32's 2^-24"
        )
    if report.low_prob_leaves:
        _err(
            f"warning: {report.low_prob_leaves} leaf probabilities below 2^-10 carry "
            f"less precision than binary32 would"
        )


def cmd_compile(args: argparse.Namespace) -> int:
    ensemble = _load(args.model)
    _, report = quantize_ensemble(ensemble)
    _print_precision_warnings(report)
    cfg = EmitConfig(
        mode=Mode(args.mode),
        nonneg_fast=args.nonneg_fast,
        function_name=args.function_name,
        emit_argmax_helper=args.argmax_helper,
        emit_test_harness=args.harness is not None,
    )
    unit = emit(ensemble, cfg)
    out = Path(args.output)
    _atomic_write(out, unit.source_text)
    if args.harness is not None:
        vectors = read_vectors_file(args.harness, ensemble.num_features)
        harness_text = emit_harness(ensemble, cfg, vectors, replicate=args.replicate)
        _atomic_write(out.with_suffix(".harness.c"), harness_text)
    _err(f"wrote {out} ({unit.manifest['digest']})")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    ensemble = _load(args.model)
    vectors = read_vectors_file(args.vectors, ensemble.num_features)
    n = len(ensemble.trees)
    if args.mode == "integer":
        q, _ = quantize_ensemble(ensemble)
        for v in vectors:
            acc, cls = predict_int(q, v)
            probs = probabilities_from_int(acc)
            print(" ".join(repr(p) for p in probs), cls)
    else:
        for v in vectors:
            acc, cls = predict_float(ensemble, v)
            print(" ".join(repr(s / n) for s in acc.sums), cls)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    ensemble = _load(args.model)
    input_gen = FileInputs(args.vectors) if args.vectors else UniformInputs()
    if args.cc:
        report = run_compiled_differential(
            ensemble,
            EmitConfig(mode=Mode(args.mode)),
            args.cc,
            args.samples,
            args.seed,
            input_gen,
            jobs=args.jobs,
        )
        if report.compiled_status == "skipped":
            _err(f"compiled check skipped: toolchain {args.cc!r} not found")
    else:
        report = run_differential(
            ensemble, args.samples, args.seed, input_gen, jobs=args.jobs
        )
    print(json.dumps(report.to_json(), indent=2))
    _err(
        f"samples={report.samples} n={report.n} "
        f"max|diff|={report.max_abs_prob_diff:.3e} bound={float(report.bound):.3e} "
        f"holds={report.bound_holds}"
    )
    _err(
        f"argmax mismatches={report.argmax_mismatches} "
        f"(near-tie {report.near_tie_mismatches}, hard {report.hard_mismatches}); "
        f"compiled={report.compiled_status or 'not requested'}"
    )
    ok = (
        report.hard_mismatches == 0
        and report.bound_holds
        and (report.compiled_diff in (None, 0))
    )
    return 0 if ok else 1


def _tree_depth(tree: Tree) -> int:
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
    return depth


def cmd_inspect(args: argparse.Namespace) -> int:
    ensemble = _load(args.model)
    _, report = quantize_ensemble(ensemble)
    depths = [_tree_depth(t) for t in ensemble.trees]
    thresholds = [
        f32_of_bits(node.threshold_bits)
        for tree in ensemble.trees
        for node in tree.nodes
        if isinstance(node, Branch)
    ]
    total_nodes = sum(len(t.nodes) for t in ensemble.trees)
    print(f"model_id: {ensemble.model_id}")
    print(f"trees: n={len(ensemble.trees)}")
    print(f"features: {ensemble.num_features}")
    print(f"classes: {ensemble.num_classes}")
    print(f"nodes: {total_nodes} total, {total_nodes - len(thresholds)} leaves")
    print(f"depth: min {min(depths)}, max depth {max(depths)}")
    if thresholds:
        print(f"threshold range: [{min(thresholds)!r}, {max(thresholds)!r}]")
    else:
        print("threshold range: none (leaf-only trees)")
    # Eligibility of the raw-compare form, assuming the user can vouch for a
    # non-negative feature domain; negative thresholds rule it out entirely.
    if check_nonneg(ensemble, feature_mins=[0.0] * ensemble.num_features):
        print(
            "nonneg_fast: eligible if all feature domains are declared non-negative"
        )
    elif _has_negative_threshold(ensemble):
        print("nonneg_fast: ineligible (negative thresholds present)")
    else:
        print("nonneg_fast: ineligible (strict comparison against +0.0 present)")
    print(
        f"precision: bound n/2^32 = {float(report.bound):.3e}, "
        f"tree-count warning: {report.warn_tree_count}, "
        f"low-probability leaves: {report.low_prob_leaves}"
    )
    return 0


def _has_negative_threshold(ensemble: Ensemble) -> bool:
    return any(
        node.threshold_bits & 0x8000_0000
        for tree in ensemble.trees
        for node in tree.nodes
        if isinstance(node, Branch)
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treegrate",
        description="Compile tree-ensemble classifiers to standalone integer-only C.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_compile = sub.add_parser("compile", help="generate a C source file")
    p_compile.add_argument("model", help="canonical model JSON path")
    p_compile.add_argument("-o", "--output", required=True, help="output C file")
    p_compile.add_argument(
        "--mode",
        choices=[m.value for m in Mode],
        default=Mode.INTEGER.value,
        help="code generation mode (default: integer)",
    )
    p_compile.add_argument(
        "--nonneg-fast",
        action="store_true",
        help="compare raw feature words (requires non-negative thresholds and domains)",
    )
    p_compile.add_argument("--function-name", default="predict")
    p_compile.add_argument(
        "--argmax-helper",
        action="store_true",
        help="also emit an argmax helper function",
    )
    p_compile.add_argument(
        "--harness",
        metavar="VECTORS",
        help="also emit a test-harness C file embedding these input vectors",
    )
    p_compile.add_argument(
        "--replicate",
        type=int,
        default=1,
        help="harness calls per vector (output is identical for any count)",
    )
    p_compile.set_defaults(func=cmd_compile)

    p_predict = sub.add_parser("predict", help="run the interpreter over input vectors")
    p_predict.add_argument("model")
    p_predict.add_argument("vectors", help="one vector per line, 'nan' for missing")
    p_predict.add_argument(
        "--mode", choices=["float", "integer"], default="integer"
    )
    p_predict.set_defaults(func=cmd_predict)

    p_verify = sub.add_parser("verify", help="differential verification report")
    p_verify.add_argument("model")
    p_verify.add_argument("--samples", type=int, default=10000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument(
        "--vectors", help="verify over this vector file instead of random inputs"
    )
    p_verify.add_argument(
        "--cc", help="C compiler command; adds a compiled-code comparison"
    )
    p_verify.add_argument(
        "--mode",
        choices=[m.value for m in Mode],
        default=Mode.INTEGER.value,
        help="mode for the compiled comparison (default: integer)",
    )
    p_verify.add_argument("--jobs", type=int, default=1)
    p_verify.set_defaults(func=cmd_verify)

    p_inspect = sub.add_parser("inspect", help="print a model summary")
    p_inspect.add_argument("model")
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ModelError as exc:
        _err(str(exc))
        return 2
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return 2
    except (ToolchainError, HarnessError) as exc:
        _err(str(exc))
        return 3
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror or exc}".strip())
        return 3


if __name__ == "__main__":
    sys.exit(main())
