"""IR program loading, validation, token capping, and -O3 reference compilation.

IR is treated as opaque text: the only structural inspection done here is a
lightweight scan of externally visible symbols, used to check that the two
sides of a pair expose the same public interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import EmptyInput, InvalidIr, OverCap, ToolFailure
from .toolchain import ToolchainConfig

DEFAULT_TOKEN_CAP = 5000

# Identifier runs count as one token; every other non-space character counts
# as its own token.  Deterministic and dependency-free, so cap enforcement is
# reproducible offline.
_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")

Tokenizer = Callable[[str], int]


def default_token_count(text: str) -> int:
    return len(_TOKEN_RE.findall(text))


class Origin(str, Enum):
    INPUT = "input"
    O3_REFERENCE = "o3_reference"
    LLM_GENERATED = "llm_generated"


class Provenance(str, Enum):
    COMPILER_O3 = "compiler_o3"
    LLM_PIPELINE = "llm_pipeline"


@dataclass
class IrProgram:
    id: str
    text: str
    token_count: int
    origin: Origin = Origin.INPUT
    valid: bool | None = None  # None = not yet checked

    @classmethod
    def from_text(
        cls,
        id: str,
        text: str,
        origin: Origin = Origin.INPUT,
        tokenizer: Tokenizer = default_token_count,
    ) -> "IrProgram":
        return cls(id=id, text=text, token_count=tokenizer(text), origin=origin)


@dataclass
class IrPair:
    unopt: IrProgram
    opt: IrProgram
    provenance: Provenance = Provenance.COMPILER_O3

    def symbol_mismatch(self) -> set[str]:
        """Public symbols that do not match across the pair.

        The optimized side may carry an ``_opt`` suffix on its clones; those
        are treated as matching their base name.
        """
        base = public_symbols(self.unopt.text)
        opt = {_strip_opt_suffix(s) for s in public_symbols(self.opt.text)}
        return base ^ opt


_DEFINE_RE = re.compile(r"^define\b([^@]*)@([-\w.$]+|\"[^\"]+\")\s*\(", re.MULTILINE)
_HIDDEN_LINKAGE = ("internal", "private")


def public_symbols(ir_text: str) -> set[str]:
    """Names of externally visible function definitions in a textual module."""
    symbols = set()
    for match in _DEFINE_RE.finditer(ir_text):
        prefix, name = match.group(1), match.group(2)
        if any(kw in prefix.split() for kw in _HIDDEN_LINKAGE):
            continue
        symbols.add(name.strip('"'))
    return symbols


def _strip_opt_suffix(name: str) -> str:
    return name[:-4] if name.endswith("_opt") else name


def load_ir(path: str | Path, tokenizer: Tokenizer = default_token_count) -> IrProgram:
    """Load a textual IR file; does not validate syntax."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    if not text:
        raise EmptyInput(f"{path} is empty")
    return IrProgram.from_text(id=path.stem, text=text, tokenizer=tokenizer)


def validate_ir(program: IrProgram, toolchain: ToolchainConfig) -> None:
    """Run the IR verifier; raises InvalidIr when the module is rejected."""
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".ll", delete=False) as tmp:
        tmp.write(program.text)
        path = tmp.name
    try:
        result = toolchain.run(
            "opt", ["-passes=verify", "-disable-output", path], timeout=60
        )
    finally:
        Path(path).unlink(missing_ok=True)
    if not result.ok:
        program.valid = False
        raise InvalidIr(f"verifier rejected {program.id}", stderr=result.stderr)
    program.valid = True


def enforce_token_cap(pair: IrPair, cap: int = DEFAULT_TOKEN_CAP) -> None:
    """Check the combined unopt+opt token budget for one sample."""
    if cap <= 0:
        raise ValueError("token cap must be positive")
    total = pair.unopt.token_count + pair.opt.token_count
    if total > cap:
        raise OverCap(total, cap)


def compile_o3_reference(
    program: IrProgram,
    toolchain: ToolchainConfig,
    tokenizer: Tokenizer = default_token_count,
) -> IrProgram:
    """Run the -O3 pipeline on *program* and return the optimized module."""
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".ll", delete=False) as tmp:
        tmp.write(program.text)
        path = tmp.name
    try:
        result = toolchain.run("opt", ["-O3", "-S", path], timeout=300)
    finally:
        Path(path).unlink(missing_ok=True)
    if not result.ok:
        raise ToolFailure(
            f"opt -O3 failed on {program.id}",
            stderr=result.stderr,
            returncode=result.returncode,
        )
    return IrProgram.from_text(
        id=program.id, text=result.stdout, origin=Origin.O3_REFERENCE, tokenizer=tokenizer
    )


def write_ir(program: IrProgram, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(program.text)
    return path


def reloaded(program: IrProgram, tokenizer: Tokenizer = default_token_count) -> IrProgram:
    """Round-trip helper used in tests: re-derive counts from text."""
    return replace(program, token_count=tokenizer(program.text))
