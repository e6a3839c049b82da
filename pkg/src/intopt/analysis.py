"""Collect textual compiler-analysis output for a resolved analysis set.

Each analysis maps to an ``opt`` printer pass via a versioned name map;
payloads are verbatim tool output, never synthesized.  Analyses with no
known printer are recorded as skipped rather than dropped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .ir import IrProgram
from .toolchain import ToolchainConfig

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30


@dataclass
class AnalysisNameMap:
    entries: dict[str, str]  # analysis class name -> opt printer pass string

    @classmethod
    def default(cls) -> "AnalysisNameMap":
        text = resources.files("intopt.data").joinpath("analysis_print_passes.json").read_text()
        return cls(entries=json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "AnalysisNameMap":
        return cls(entries=json.loads(Path(path).read_text()))

    def validate_against(self, toolchain: ToolchainConfig) -> set[str]:
        """Printer names the pinned opt does not accept (empty when unknown)."""
        result = toolchain.run("opt", ["--print-passes"], timeout=30)
        if not result.ok:
            return set()
        known = set(result.stdout.split())
        return {p for p in self.entries.values() if p not in known}


@dataclass
class AnalysisItem:
    analysis_id: str
    print_pass: str | None
    scope: str  # "function" or "module"
    payload: str
    status: str  # "ok", "skipped", "failed", "timeout"


@dataclass
class AnalysisBundle:
    for_program: str
    items: list[AnalysisItem] = field(default_factory=list)


def collect_analysis(
    program: IrProgram,
    analyses: list[str],
    name_map: AnalysisNameMap,
    toolchain: ToolchainConfig,
    timeout_s: int = DEFAULT_TIMEOUT_S,
) -> AnalysisBundle:
    """Run each analysis printer on *program* and capture its text.

    LLVM prints analyses on stderr; both streams are captured and
    concatenated (stdout first).  Failures are per-item: a bad analysis
    never aborts the bundle.
    """
    bundle = AnalysisBundle(for_program=program.id)
    before = hashlib.sha256(program.text.encode()).hexdigest()

    with tempfile.NamedTemporaryFile("w", suffix=".ll", delete=False) as tmp:
        tmp.write(program.text)
        ir_path = tmp.name
    try:
        for analysis_id in sorted(set(analyses)):
            print_pass = name_map.entries.get(analysis_id)
            if print_pass is None:
                bundle.items.append(
                    AnalysisItem(analysis_id, None, "function", "", "skipped")
                )
                continue
            scope = "module" if "module" in print_pass else "function"
            try:
                result = toolchain.run(
                    "opt",
                    [f"-p={print_pass}", "-disable-output", ir_path],
                    timeout=timeout_s,
                )
            except Exception as exc:  # subprocess timeout or spawn failure
                status = "timeout" if "timed out" in str(exc).lower() else "failed"
                bundle.items.append(
                    AnalysisItem(analysis_id, print_pass, scope, str(exc), status)
                )
                continue
            payload = result.stdout + result.stderr
            status = "ok" if result.ok else "failed"
            bundle.items.append(
                AnalysisItem(analysis_id, print_pass, scope, payload, status)
            )
    finally:
        Path(ir_path).unlink(missing_ok=True)

    after = hashlib.sha256(program.text.encode()).hexdigest()
    assert before == after, "analysis collection must not mutate the input IR"
    return bundle


def render_bundle(bundle: AnalysisBundle) -> str:
    """Deterministic concatenation with per-analysis headers.

    The result drops straight into the analysis slot of the refinement and
    realization prompts.  Skipped items are omitted from the body and noted
    in a single trailing comment line.
    """
    sections = []
    skipped = []
    for item in sorted(bundle.items, key=lambda it: it.analysis_id):
        if item.status != "ok":
            skipped.append(f"{item.analysis_id}({item.status})")
            continue
        payload = item.payload.rstrip("\n")
        sections.append(f"=== {item.analysis_id} ===\n{payload}")
    text = "\n\n".join(sections)
    if skipped:
        note = "; analyses not collected: " + ", ".join(skipped)
        text = f"{text}\n{note}" if text else note
    return text
