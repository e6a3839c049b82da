"""Two-stage correctness checking: translation validation first, then
differential fuzzing when formal verification is unavailable or inconclusive.

Every pair leaves with exactly one verdict; anything other than
"equivalent" counts as incorrect downstream.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BuildFailure, SymbolClash, ToolFailure, ToolMissing, UnsupportedSignature
from .ir import IrPair, IrProgram, Origin, public_symbols
from .llm import BackendConfig, LlmRequest, complete
from .prompts import StagePromptSet, render, strip_code_fences
from .toolchain import ToolchainConfig

logger = logging.getLogger(__name__)

DEFAULT_FUZZ_RUNS = 200_000
DEFAULT_ALIVE_TIMEOUT_S = 60
DEFAULT_FUZZ_WALLCLOCK_S = 600

SANITIZER_FLAGS = ["-fsanitize=fuzzer,address,undefined"]

# External symbols a pair may reference and still be differential-testable:
# intrinsics and the common libm surface.  Everything else means the pair can
# call code we cannot link, so it is excluded (matching the dataset filter
# for custom external functions).
_LIBM_WHITELIST = {
    "sin", "cos", "tan", "asin", "acos", "atan", "atan2", "sinh", "cosh",
    "tanh", "exp", "exp2", "expm1", "log", "log2", "log10", "log1p", "pow",
    "sqrt", "cbrt", "hypot", "fabs", "floor", "ceil", "round", "trunc",
    "rint", "nearbyint", "fmod", "remainder", "fma", "fmin", "fmax",
    "copysign", "ldexp", "frexp", "modf",
    "sinf", "cosf", "tanf", "expf", "logf", "log10f", "powf", "sqrtf",
    "fabsf", "floorf", "ceilf", "fmodf", "fminf", "fmaxf",
    "memcpy", "memset", "memmove", "memcmp", "abs", "labs",
}


@dataclass
class VerificationVerdict:
    method: str  # "alive2", "diff_test", "none"
    status: str  # equivalent | inequivalent | alive2_timeout | alive2_unsupported
    #             | fuzz_crash | build_failure | skipped
    detail: str = ""
    fuzz_runs_completed: int = 0
    crash_input: str | None = None

    @property
    def is_equivalent(self) -> bool:
        return self.status == "equivalent"

    def to_json(self) -> dict:
        data = {
            "method": self.method,
            "status": self.status,
            "fuzz_runs_completed": self.fuzz_runs_completed,
        }
        if self.crash_input:
            data["crash_input"] = self.crash_input
        return data


@dataclass
class FuzzHarness:
    source: str
    function_pairs: list[tuple[str, str]]
    provenance: str  # "llm_generated" or "template"


@dataclass
class VerifyConfig:
    toolchain: ToolchainConfig
    runs: int = DEFAULT_FUZZ_RUNS
    harness_mode: str = "template"  # or "llm"
    backend: BackendConfig | None = None
    alive_timeout_s: int = DEFAULT_ALIVE_TIMEOUT_S
    fuzz_wallclock_s: int = DEFAULT_FUZZ_WALLCLOCK_S
    alive_flags: list[str] = field(default_factory=list)
    work_dir: Path | None = None


# --- Stage 1: translation validation -------------------------------------

def alive_check(
    pair: IrPair,
    toolchain: ToolchainConfig,
    timeout_s: int = DEFAULT_ALIVE_TIMEOUT_S,
    extra_flags: list[str] | None = None,
) -> VerificationVerdict:
    """Run the translation validator on the pair."""
    if not toolchain.available("alive_tv"):
        return VerificationVerdict(
            method="alive2", status="skipped", detail="alive-tv binary not available"
        )
    import tempfile

    with tempfile.TemporaryDirectory(prefix="intopt-alive-") as tmp:
        src = Path(tmp) / "src.ll"
        tgt = Path(tmp) / "tgt.ll"
        src.write_text(pair.unopt.text)
        tgt.write_text(pair.opt.text)
        args = (extra_flags or []) + [str(src), str(tgt)]
        try:
            result = toolchain.run("alive_tv", args, timeout=timeout_s)
        except subprocess.TimeoutExpired:
            return VerificationVerdict(
                method="alive2",
                status="alive2_timeout",
                detail=f"timed out after {timeout_s}s (flags: {shlex.join(args[:-2])})",
            )
    output = result.stdout + result.stderr
    incorrect = re.search(r"(\d+)\s+incorrect transformations", output)
    correct = re.search(r"(\d+)\s+correct transformations", output)
    failed = re.search(r"(\d+)\s+failed-to-prove transformations", output)
    if incorrect and int(incorrect.group(1)) > 0:
        return VerificationVerdict(method="alive2", status="inequivalent", detail=output)
    if "ERROR: Timeout" in output or (failed and int(failed.group(1)) > 0):
        return VerificationVerdict(method="alive2", status="alive2_timeout", detail=output)
    if "ERROR: Unsupported" in output or "not supported" in output:
        return VerificationVerdict(method="alive2", status="alive2_unsupported", detail=output)
    if correct and int(correct.group(1)) > 0 and result.ok:
        return VerificationVerdict(method="alive2", status="equivalent", detail=output)
    if not result.ok:
        raise ToolFailure("alive-tv crashed", stderr=output, returncode=result.returncode)
    return VerificationVerdict(method="alive2", status="alive2_unsupported", detail=output)


# --- Differential-testing eligibility -------------------------------------

_DECLARE_RE = re.compile(r"^declare\b[^@]*@([-\w.$]+)\s*\(", re.MULTILINE)
_EXTERNAL_GLOBAL_RE = re.compile(r"^@([-\w.$]+)\s*=\s*external\s+", re.MULTILINE)


def diff_test_eligibility(pair: IrPair) -> str | None:
    """Reason the pair cannot be differentially tested, or None if it can."""
    for text in (pair.unopt.text, pair.opt.text):
        for name in _DECLARE_RE.findall(text):
            if name.startswith("llvm."):
                continue
            if name in _LIBM_WHITELIST:
                continue
            return f"external function @{name} outside the intrinsic/libm whitelist"
        m = _EXTERNAL_GLOBAL_RE.search(text)
        if m:
            return f"externally defined global @{m.group(1)}"
    return None


# --- Module merging --------------------------------------------------------

def merge_for_diff(pair: IrPair) -> IrProgram:
    """Single module with both versions; optimized symbols get the _opt suffix."""
    mismatch = pair.symbol_mismatch()
    if mismatch:
        raise SymbolClash(
            f"public symbol sets differ between the two sides: {sorted(mismatch)}"
        )
    try:
        import llvmlite.binding as llb
    except ImportError as exc:
        raise ToolMissing("module merging requires llvmlite") from exc
    llb.initialize_native_target()
    llb.initialize_native_asmprinter()
    llb.initialize_native_asmparser()

    try:
        base = llb.parse_assembly(pair.unopt.text)
        optm = llb.parse_assembly(pair.opt.text)
    except RuntimeError as exc:
        raise SymbolClash(f"cannot parse pair for merging: {exc}") from exc

    hidden = (llb.Linkage.internal, llb.Linkage.private)
    for fn in optm.functions:
        if fn.is_declaration:
            continue
        if fn.linkage in hidden or fn.name.endswith("_opt"):
            continue
        fn.name = fn.name + "_opt"
    for gv in optm.global_variables:
        if gv.is_declaration or gv.linkage in hidden:
            continue
        gv.name = gv.name + "_opt"
    try:
        base.link_in(optm)
        merged_text = str(base)
        llb.parse_assembly(merged_text).verify()
    except RuntimeError as exc:
        raise SymbolClash(f"merge failed: {exc}") from exc
    return IrProgram.from_text(
        id=f"{pair.unopt.id}.merged", text=merged_text, origin=pair.opt.origin
    )


# --- Harness generation ----------------------------------------------------

_SCALAR_C_TYPES = {
    "i1": ("bool", 1),
    "i8": ("int8_t", 1),
    "i16": ("int16_t", 2),
    "i32": ("int32_t", 4),
    "i64": ("int64_t", 8),
    "float": ("float", 4),
    "double": ("double", 8),
}

_DEFINE_HEADER_RE = re.compile(r"^define\b(?P<head>[^@]*)@(?P<name>[-\w.$]+)\s*\((?P<params>.*)$", re.MULTILINE)


@dataclass
class FnSignature:
    name: str
    ret: str  # LLVM type
    params: list[str]  # LLVM types


def scan_signatures(ir_text: str) -> dict[str, FnSignature]:
    """Signatures of externally visible definitions, by symbol name."""
    sigs: dict[str, FnSignature] = {}
    for match in _DEFINE_HEADER_RE.finditer(ir_text):
        head = match.group("head").split()
        if "internal" in head or "private" in head:
            continue
        ret = _last_type_token(head)
        params_text = _to_close_paren(match.group("params"))
        params = _param_types(params_text)
        if ret is None or params is None:
            continue
        sigs[match.group("name")] = FnSignature(match.group("name"), ret, params)
    return sigs


_ATTR_WORDS = {
    "dso_local", "dso_preferred", "noundef", "signext", "zeroext", "inreg",
    "external", "linkonce", "linkonce_odr", "weak", "weak_odr", "common",
    "appending", "available_externally", "hidden", "protected", "default",
    "local_unnamed_addr", "unnamed_addr", "fastcc", "coldcc", "ccc", "tailcc",
    "range", "nonnull", "align", "dereferenceable",
}


def _last_type_token(head: list) -> str | None:
    for token in reversed(head):
        tok = token.strip()
        if not tok or tok in _ATTR_WORDS or tok.startswith(("range(", "align(")):
            continue
        return tok
    return None


def _to_close_paren(text: str) -> str:
    depth = 1
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return text[:i]
    return text


def _param_types(params_text: str) -> list[str] | None:
    params_text = params_text.strip()
    if not params_text:
        return []
    parts = []
    depth = 0
    current = ""
    for ch in params_text:
        if ch in "<[{(":
            depth += 1
        elif ch in ">]})":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(current.strip())
            current = ""
        else:
            current += ch
    parts.append(current.strip())
    types = []
    for part in parts:
        if part == "...":
            return None
        types.append(part.split()[0])
    return types


def function_pairs(merged: IrProgram) -> list[tuple[str, str]]:
    """(base, base_opt) symbol pairs defined in a merged module."""
    symbols = public_symbols(merged.text)
    return sorted(
        (name, name + "_opt")
        for name in symbols
        if not name.endswith("_opt") and name + "_opt" in symbols
    )


def generate_harness(
    merged: IrProgram,
    mode: str = "template",
    backend: BackendConfig | None = None,
    prompts: StagePromptSet | None = None,
) -> FuzzHarness:
    """Produce a differential-fuzzing harness for the merged module."""
    pairs = function_pairs(merged)
    if not pairs:
        raise SymbolClash("merged module contains no (base, base_opt) pairs")
    if mode == "llm":
        if backend is None:
            raise ValueError("llm harness mode requires a backend")
        prompts = prompts or StagePromptSet.default()
        prompt = render(prompts.fuzz_harness_template, ir=merged.text)
        response = complete(
            LlmRequest(
                backend_id=backend.backend_id, prompt=prompt, purpose="harness_generation"
            ),
            backend,
        )
        source = strip_code_fences(response.strip("\n")) + "\n"
        return FuzzHarness(source=source, function_pairs=pairs, provenance="llm_generated")
    return FuzzHarness(
        source=render_template_harness(merged, pairs),
        function_pairs=pairs,
        provenance="template",
    )


def render_template_harness(merged: IrProgram, pairs: list[tuple[str, str]]) -> str:
    """Offline harness for all-scalar signatures: decode fixed-width
    arguments from the fuzz input, call both versions, trap on mismatch."""
    sigs = scan_signatures(merged.text)
    decls = []
    bodies = []
    for base, opt in pairs:
        sig = sigs.get(base)
        opt_sig = sigs.get(opt)
        if sig is None or opt_sig is None:
            raise UnsupportedSignature(f"cannot scan signature of {base}/{opt}")
        for ty in [sig.ret] + sig.params:
            if ty != "void" and ty not in _SCALAR_C_TYPES:
                raise UnsupportedSignature(
                    f"{base} has non-scalar type '{ty}'; use llm harness mode"
                )
        decls.append(_c_decl(sig))
        decls.append(_c_decl(FnSignature(opt, sig.ret, sig.params)))
        bodies.append(_c_call_block(sig, opt))

    total = sum(
        _SCALAR_C_TYPES[t][1] for base, _ in pairs for t in sigs[base].params
    )
    lines = [
        "#include <cstdint>",
        "#include <cstddef>",
        "#include <cstring>",
        "",
        *decls,
        "",
        "extern \"C\" int LLVMFuzzerTestOneInput(const uint8_t* data, size_t size) {",
        f"    if (size < {max(total, 1)}) return 0;",
        "    size_t off = 0;",
        "    (void)off;",
        *bodies,
        "    return 0;",
        "}",
    ]
    return "\n".join(lines) + "\n"


def _c_decl(sig: FnSignature) -> str:
    ret = "void" if sig.ret == "void" else _SCALAR_C_TYPES[sig.ret][0]
    params = ", ".join(_SCALAR_C_TYPES[p][0] for p in sig.params)
    return f'extern "C" {ret} {sig.name}({params});'


def _c_call_block(sig: FnSignature, opt_name: str) -> str:
    lines = []
    args = []
    for i, ty in enumerate(sig.params):
        cty, width = _SCALAR_C_TYPES[ty]
        var = f"a{i}_{sig.name}"
        lines.append(f"    {cty} {var};")
        lines.append(f"    std::memcpy(&{var}, data + off, {width}); off += {width};")
        if ty == "i1":
            lines.append(f"    {var} = {var} & 1;")
        args.append(var)
    call_args = ", ".join(args)
    if sig.ret == "void":
        lines.append(f"    {sig.name}({call_args});")
        lines.append(f"    {opt_name}({call_args});")
    else:
        cty = _SCALAR_C_TYPES[sig.ret][0]
        lines.append(f"    {cty} r_base = {sig.name}({call_args});")
        lines.append(f"    {cty} r_opt  = {opt_name}({call_args});")
        if sig.ret in ("float", "double"):
            # Bitwise compare: NaN-safe, and identical semantics must yield
            # identical bits on the same input.
            lines.append("    if (std::memcmp(&r_base, &r_opt, sizeof(r_base)) != 0) {")
        else:
            lines.append("    if (r_base != r_opt) {")
        lines.append("        __builtin_trap();")
        lines.append("    }")
    return "\n".join(lines)


# --- Building and running the fuzzer ---------------------------------------

def build_fuzzer(
    merged: IrProgram,
    harness: FuzzHarness,
    toolchain: ToolchainConfig,
    work_dir: str | Path,
) -> Path:
    """Compile the merged IR with llc, link with the harness under the
    fuzzing sanitizers, and return the binary path."""
    work = Path(work_dir).resolve()
    work.mkdir(parents=True, exist_ok=True)
    merged_ll = work / "merged.ll"
    merged_ll.write_text(merged.text)
    merged_obj = work / "merged.o"
    result = toolchain.run(
        "llc",
        ["-filetype=obj", "-relocation-model=pic", str(merged_ll), "-o", str(merged_obj)],
        timeout=300,
    )
    if not result.ok:
        raise BuildFailure("llc failed on merged module", output=result.stderr)
    fuzz_cc = work / "fuzz.cc"
    fuzz_cc.write_text(harness.source)
    binary = work / "fuzzer"
    result = toolchain.run(
        "clangxx",
        SANITIZER_FLAGS + [str(fuzz_cc), str(merged_obj), "-o", str(binary)],
        timeout=300,
    )
    if not result.ok:
        raise BuildFailure("fuzzer link failed", output=result.stderr)
    return binary


_LAST_RUN_RE = re.compile(r"^#(\d+)\b", re.MULTILINE)
_CRASH_FILE_RE = re.compile(r"Test unit written to\s+(\S+)")


def run_diff_fuzz(
    binary: str | Path,
    runs: int = DEFAULT_FUZZ_RUNS,
    corpus_dir: str | Path | None = None,
    wallclock_s: int = DEFAULT_FUZZ_WALLCLOCK_S,
) -> VerificationVerdict:
    """Fuzz until the run budget completes cleanly or a divergence traps."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    binary = Path(binary).resolve()
    if not binary.exists():
        raise ToolMissing(f"fuzzer binary {binary} does not exist")
    work = binary.parent
    corpus = Path(corpus_dir).resolve() if corpus_dir else work / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    argv = [str(binary), f"-runs={runs}", str(corpus)]
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=wallclock_s, cwd=work
        )
    except subprocess.TimeoutExpired:
        return VerificationVerdict(
            method="diff_test",
            status="skipped",
            detail=f"fuzzing exceeded the {wallclock_s}s wall-clock budget",
        )
    output = proc.stdout + proc.stderr
    completed = 0
    matches = _LAST_RUN_RE.findall(output)
    if matches:
        completed = int(matches[-1])
    if proc.returncode == 0:
        return VerificationVerdict(
            method="diff_test",
            status="equivalent",
            detail=output[-4000:],
            fuzz_runs_completed=max(completed, runs),
        )
    crash_match = _CRASH_FILE_RE.search(output)
    crash_path = None
    if crash_match:
        crash_path = str((work / crash_match.group(1)).resolve())
    return VerificationVerdict(
        method="diff_test",
        status="fuzz_crash",
        detail=output[-4000:],
        fuzz_runs_completed=completed,
        crash_input=crash_path,
    )


# --- Composite -------------------------------------------------------------

def verify(pair: IrPair, config: VerifyConfig) -> VerificationVerdict:
    """Translation validation first; differential fuzzing as the fallback."""
    verdict = alive_check(
        pair, config.toolchain, config.alive_timeout_s, config.alive_flags
    )
    if verdict.status in ("equivalent", "inequivalent"):
        return verdict

    reason = diff_test_eligibility(pair)
    if reason is not None:
        return VerificationVerdict(
            method="diff_test", status="skipped", detail=f"not diff-testable: {reason}"
        )

    import tempfile

    work = config.work_dir or Path(tempfile.mkdtemp(prefix="intopt-verify-"))
    try:
        merged = merge_for_diff(pair)
        harness = generate_harness(
            merged, mode=config.harness_mode, backend=config.backend
        )
        binary = build_fuzzer(merged, harness, config.toolchain, work)
    except (SymbolClash, BuildFailure) as exc:
        detail = getattr(exc, "output", "") or str(exc)
        return VerificationVerdict(method="diff_test", status="build_failure", detail=detail)
    except UnsupportedSignature as exc:
        return VerificationVerdict(method="diff_test", status="skipped", detail=str(exc))
    return run_diff_fuzz(
        binary, runs=config.runs, corpus_dir=work / "corpus",
        wallclock_s=config.fuzz_wallclock_s,
    )
