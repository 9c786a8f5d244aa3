"""Standalone C99 emission of ensemble inference as nested if-else trees.

Three modes:
  float   -- float threshold compares, float leaf additions (baseline)
  flint   -- integer key compares on reinterpreted bits, float leaf additions
  integer -- integer key compares plus fixed-point leaf increments; the file
             contains no floating-point types or literals at all

The integer-mode entry point takes raw binary32 bit patterns and caller-zeroed
32-bit accumulators, so the signature itself is FPU-free.  With
``nonneg_fast`` the per-feature key prologue is dropped and feature words are
compared raw as signed integers, which is order-correct only when thresholds
and the feature domain are non-negative.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

from .flint import Op, f32_of_bits, flint_key
from .model import Branch, Ensemble, FeatureVector, Leaf
from .quantize import quantize_ensemble

__all__ = [
    "Mode",
    "EmitConfig",
    "EmittedUnit",
    "ConfigError",
    "check_nonneg",
    "emit",
    "emit_harness",
    "scan_float_tokens",
]


class Mode(enum.Enum):
    FLOAT = "float"
    FLINT = "flint"
    INTEGER = "integer"


class ConfigError(ValueError):
    """The emit configuration is invalid for the given ensemble."""


@dataclass(frozen=True)
class EmitConfig:
    mode: Mode = Mode.INTEGER
    nonneg_fast: bool = False
    function_name: str = "predict"
    emit_argmax_helper: bool = False
    emit_test_harness: bool = False


@dataclass(frozen=True)
class EmittedUnit:
    source_text: str
    manifest: dict


_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

_KEY_HELPER = """\
static inline int32_t tg_key(uint32_t w) {
    /* Order-preserving signed key; implementation-defined conversions avoided. */
    if (w == 0x80000000u) { w = 0u; }
    if (w < 0x80000000u) { return (int32_t)w; }
    return (int32_t)((w ^ 0x7FFFFFFFu) - 0x80000000u) + INT32_MIN;
}
"""

_MISSING_HELPER = """\
static inline int tg_is_missing(uint32_t w) {
    return (w & 0x7F800000u) == 0x7F800000u && (w & 0x007FFFFFu) != 0u;
}
"""

_BITS_HELPER = """\
static inline uint32_t tg_bits(float x) {
    union { float f; uint32_t u; } v;
    v.f = x;
    return v.u;
}
"""

_F32_HELPER = """\
static inline float tg_f32(uint32_t w) {
    union { uint32_t u; float f; } v;
    v.u = w;
    return v.f;
}
"""


def _unsafe_fast_nodes(ensemble: Ensemble) -> list[str]:
    """Reasons the raw-bits comparison form would be order-incorrect."""
    problems = []
    for t_idx, tree in enumerate(ensemble.trees):
        for n_idx, node in enumerate(tree.nodes):
            if not isinstance(node, Branch):
                continue
            if node.threshold_bits & 0x8000_0000:
                problems.append(
                    f"tree {t_idx} node {n_idx}: negative threshold"
                )
            elif node.threshold_bits == 0 and node.op is Op.LT:
                # -0.0 inputs satisfy a nonnegative domain but compare as the
                # smallest signed integer, flipping (x < +0.0) to true.
                problems.append(
                    f"tree {t_idx} node {n_idx}: strict compare against +0.0"
                )
    return problems


def check_nonneg(
    ensemble: Ensemble, feature_mins: Sequence[float] | None = None
) -> bool:
    """True iff the raw-bits comparison form is provably safe.

    Requires every threshold to be >= +0.0 (with no strict compare against
    +0.0, which -0.0 inputs would break) and a declared per-feature minimum
    >= +0.0 for every feature.  Without domain declarations the answer is
    False: thresholds alone cannot prove the inputs non-negative.
    """
    if _unsafe_fast_nodes(ensemble):
        return False
    if feature_mins is None or len(feature_mins) != ensemble.num_features:
        return False
    return all(m >= 0.0 for m in feature_mins)


def _format_f32(bits: int) -> str:
    """Float literal that parses back to exactly this binary32."""
    value = f32_of_bits(bits)
    if value != value or value in (float("inf"), float("-inf")):
        raise ConfigError("cannot emit a non-finite threshold as a float literal")
    return f"{value:.9g}f"


def _format_f64(p: float) -> str:
    return f"{p:.17g}"


def _format_key(key: int) -> str:
    if key >= 0:
        return f"(int32_t)0x{key:08X}"
    return str(key)


class _Emitter:
    def __init__(self, ensemble: Ensemble, cfg: EmitConfig):
        self.e = ensemble
        self.cfg = cfg
        self.lines: list[str] = []
        self.quantized = None
        if cfg.mode is Mode.INTEGER:
            self.quantized, _ = quantize_ensemble(ensemble)
        self.used_features = sorted(
            {
                node.feature
                for tree in ensemble.trees
                for node in tree.nodes
                if isinstance(node, Branch)
            }
        )

    def out(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def condition(self, node: Branch, key: int) -> str:
        cfg = self.cfg
        f = node.feature
        cmp_op = "<=" if node.op is Op.LE else "<"
        if cfg.mode is Mode.FLOAT:
            test = f"features[{f}] {cmp_op} {_format_f32(node.threshold_bits)}"
            missing = f"features[{f}] != features[{f}]"
            present = f"features[{f}] == features[{f}]"
        else:
            kc = _format_key(key)
            if cfg.mode is Mode.INTEGER:
                word = f"features[{f}]"
            else:
                word = f"b{f}"
            if cfg.nonneg_fast:
                lhs = f"(int32_t){word}"
            else:
                lhs = f"k{f}"
            test = f"{lhs} {cmp_op} {kc}"
            missing = f"tg_is_missing({word})"
            present = f"!tg_is_missing({word})"
        if node.default_left:
            return f"{missing} || ({test})"
        return f"{present} && ({test})"

    def leaf_lines(self, depth: int, leaf_probs, leaf_incs) -> None:
        if self.cfg.mode is Mode.INTEGER:
            for c, inc in enumerate(leaf_incs):
                self.out(depth, f"result[{c}] += {inc}u;")
        else:
            for c, p in enumerate(leaf_probs):
                self.out(depth, f"result[{c}] += (float){_format_f64(p)};")

    def tree_block(self, t_idx: int, depth: int) -> None:
        tree = self.e.trees[t_idx]
        qtree = self.quantized.trees[t_idx] if self.quantized is not None else None

        def walk(i: int, d: int) -> None:
            node = tree.nodes[i]
            if isinstance(node, Leaf):
                incs = qtree.nodes[i].increments if qtree is not None else None
                self.leaf_lines(d, node.probs, incs)
                return
            key = qtree.nodes[i].key if qtree is not None else _branch_key(node)
            self.out(d, f"if ({self.condition(node, key)}) {{")
            walk(node.left, d + 1)
            self.out(d, "} else {")
            walk(node.right, d + 1)
            self.out(d, "}")

        walk(tree.root, depth)

    def emit_function(self) -> None:
        cfg = self.cfg
        e = self.e
        fdim = f"[{e.num_features}]" if e.num_features > 0 else "[]"
        if cfg.mode is Mode.INTEGER:
            sig = (
                f"void {cfg.function_name}(const uint32_t features{fdim}, "
                f"uint32_t result[{e.num_classes}])"
            )
        else:
            sig = (
                f"void {cfg.function_name}(const float features{fdim}, "
                f"float result[{e.num_classes}])"
            )
        self.out(0, sig + " {")
        if not self.used_features:
            self.out(1, "(void)features;")
        else:
            if cfg.mode is Mode.FLINT:
                for f in self.used_features:
                    self.out(1, f"const uint32_t b{f} = tg_bits(features[{f}]);")
            if cfg.mode is not Mode.FLOAT and not cfg.nonneg_fast:
                for f in self.used_features:
                    word = f"features[{f}]" if cfg.mode is Mode.INTEGER else f"b{f}"
                    self.out(1, f"const int32_t k{f} = tg_key({word});")
        for t_idx in range(len(e.trees)):
            self.out(1, f"/* tree {t_idx} */")
            self.tree_block(t_idx, 1)
        self.out(0, "}")

    def emit_argmax(self) -> None:
        cfg = self.cfg
        c_count = self.e.num_classes
        acc_type = "uint32_t" if cfg.mode is Mode.INTEGER else "float"
        self.out(0, "")
        self.out(
            0,
            f"uint32_t {cfg.function_name}_argmax(const {acc_type} "
            f"result[{c_count}]) {{",
        )
        self.out(1, "uint32_t best = 0u;")
        self.out(1, f"for (uint32_t c = 1u; c < {c_count}u; ++c) {{")
        self.out(2, "if (result[c] > result[best]) { best = c; }")
        self.out(1, "}")
        self.out(1, "return best;")
        self.out(0, "}")


def _branch_key(node: Branch) -> int:
    return flint_key(node.threshold_bits)


def emit(ensemble: Ensemble, cfg: EmitConfig) -> EmittedUnit:
    """Generate one self-contained C99 source file for the configured mode.

    Raises ConfigError when ``nonneg_fast`` is requested but the threshold
    side of its safety condition does not hold (the feature-domain side is
    the caller's assertion; see check_nonneg).
    """
    if not _IDENTIFIER.match(cfg.function_name):
        raise ConfigError(f"not a C identifier: {cfg.function_name!r}")
    if cfg.nonneg_fast:
        if cfg.mode is Mode.FLOAT:
            raise ConfigError("nonneg_fast has no effect on float comparisons")
        problems = _unsafe_fast_nodes(ensemble)
        if problems:
            raise ConfigError(
                "nonneg_fast is unsafe for this model: " + "; ".join(problems)
            )

    em = _Emitter(ensemble, cfg)
    em.emit_function()
    if cfg.emit_argmax_helper:
        em.emit_argmax()

    helpers = []
    if cfg.mode is Mode.FLINT:
        helpers.append(_BITS_HELPER)
    if cfg.mode is not Mode.FLOAT:
        helpers.append(_MISSING_HELPER)
        if not cfg.nonneg_fast:
            helpers.append(_KEY_HELPER)

    body_parts = ["#include <stdint.h>", ""]
    body_parts.extend(helpers)
    body_parts.append("\n".join(em.lines))
    body = "\n".join(body_parts) + "\n"

    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    n = len(ensemble.trees)
    header = (
        "/*\n"
        f" * {cfg.function_name}: decision-tree ensemble inference\n"
        f" * format: treegrate-model/1  model: {_sanitize(ensemble.model_id)}\n"
        f" * mode={cfg.mode.value} trees={n} features={ensemble.num_features} "
        f"classes={ensemble.num_classes} nonneg_fast={str(cfg.nonneg_fast).lower()}\n"
        f" * digest=sha256:{digest}\n"
        " * generated file; do not edit\n"
        " */\n"
    )
    manifest = {
        "format_version": "treegrate-model/1",
        "model_id": ensemble.model_id,
        "mode": cfg.mode.value,
        "n": n,
        "num_features": ensemble.num_features,
        "num_classes": ensemble.num_classes,
        "digest": f"sha256:{digest}",
    }
    return EmittedUnit(source_text=header + body, manifest=manifest)


def _sanitize(text: str) -> str:
    cleaned = "".join(ch if 32 <= ord(ch) < 127 else "?" for ch in text)
    return cleaned.replace("*/", "??")


def emit_harness(
    ensemble: Ensemble,
    cfg: EmitConfig,
    vectors: Sequence[FeatureVector],
    replicate: int = 1,
) -> str:
    """Companion hosted C file: main() runs the predictor over embedded vectors.

    Prints one line per vector, space-separated decimal accumulators, after
    ``replicate`` calls with freshly zeroed accumulators (output is identical
    for any replicate count).
    """
    if not _IDENTIFIER.match(cfg.function_name):
        raise ConfigError(f"not a C identifier: {cfg.function_name!r}")
    if replicate < 1:
        raise ConfigError(f"replicate must be >= 1, got {replicate}")
    nf = ensemble.num_features
    nc = ensemble.num_classes
    for v in vectors:
        if len(v.values) != nf:
            raise ConfigError(
                f"vector has {len(v.values)} values, model expects {nf}"
            )
    nv = len(vectors)
    integer = cfg.mode is Mode.INTEGER
    ftype = "uint32_t" if integer else "float"
    fdim = f"[{nf}]" if nf > 0 else "[]"

    lines = [
        "/* test harness: one output line per embedded input vector */",
        "#include <stdint.h>",
        "#include <stdio.h>",
        "",
        f"extern void {cfg.function_name}(const {ftype} features{fdim}, "
        f"{ftype} result[{nc}]);",
        "",
    ]
    if not integer:
        lines.append(_F32_HELPER)
    if nv > 0 and nf > 0:
        lines.append(f"static const uint32_t tg_vectors[{nv}][{nf}] = {{")
        for v in vectors:
            words = ", ".join(f"0x{w:08X}u" for w in v.values)
            lines.append(f"    {{{words}}},")
        lines.append("};")
        lines.append("")

    lines.append("int main(void) {")
    if nv == 0:
        lines.append("    return 0;")
        lines.append("}")
        return "\n".join(lines) + "\n"

    lines.append(f"    {ftype} result[{nc}];")
    if not integer and nf > 0:
        lines.append(f"    float row[{nf}];")
    lines.append(f"    for (uint32_t v = 0u; v < {nv}u; ++v) {{")
    if not integer and nf > 0:
        lines.append(f"        for (uint32_t i = 0u; i < {nf}u; ++i) {{")
        lines.append("            row[i] = tg_f32(tg_vectors[v][i]);")
        lines.append("        }")
    lines.append(f"        for (uint32_t r = 0u; r < {replicate}u; ++r) {{")
    lines.append(f"            for (uint32_t c = 0u; c < {nc}u; ++c) {{")
    zero = "0u" if integer else "0.0f"
    lines.append(f"                result[c] = {zero};")
    lines.append("            }")
    if nf > 0:
        arg = "tg_vectors[v]" if integer else "row"
    else:
        arg = "(const uint32_t *)0" if integer else "(const float *)0"
    lines.append(f"            {cfg.function_name}({arg}, result);")
    lines.append("        }")
    lines.append(f"        for (uint32_t c = 0u; c < {nc}u; ++c) {{")
    lines.append('            if (c > 0u) { printf(" "); }')
    if integer:
        lines.append('            printf("%lu", (unsigned long)result[c]);')
    else:
        lines.append('            printf("%.9g", (double)result[c]);')
    lines.append("        }")
    lines.append('        printf("\\n");')
    lines.append("    }")
    lines.append("    return 0;")
    lines.append("}")
    return "\n".join(lines) + "\n"


_COMMENT_RE = re.compile(r"/\*.*?\*/|//[^\n]*", re.DOTALL)
_STRING_RE = re.compile(r'"(?:\\.|[^"\\])*"')
_FLOAT_TOKEN_RE = re.compile(
    r"\b(?:float|double)\b"
    r"|(?<![\w.])(?:\d+\.\d*|\.\d+)(?:[eE][-+]?\d+)?[fFlL]?"
    r"|(?<![\w.])\d+[eE][-+]?\d+[fFlL]?"
    r"|0[xX][0-9a-fA-F]*\.?[0-9a-fA-F]*[pP][-+]?\d+[fFlL]?"
)


def scan_float_tokens(source: str) -> list[str]:
    """All floating-point type tokens and float literals in C source code.

    Comments and string literals are stripped first; integer-mode output must
    scan clean.
    """
    code = _STRING_RE.sub('""', _COMMENT_RE.sub(" ", source))
    return _FLOAT_TOKEN_RE.findall(code)
