"""Compiler knowledge base: transform passes, descriptions, analysis deps.

Built by statically mining an LLVM source tree: the pass registry gives the
pass inventory, the Transforms sources give each pass's analysis
dependencies (``getResult<T>`` call sites), and the pass documentation
gives natural-language descriptions.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BuildEmpty, ParseError, SourceNotFound

logger = logging.getLogger(__name__)

# Registry macro entries, e.g.:
#   FUNCTION_PASS("loop-vectorize", LoopVectorizePass())
#   LOOP_ANALYSIS("loops", LoopAnalysis())
#   FUNCTION_PASS_WITH_PARAMS("loop-unroll", "LoopUnrollPass", ...)
_REGISTRY_RE = re.compile(
    r"^\s*([A-Z_]+?)_(PASS|ANALYSIS)(_WITH_PARAMS)?\s*\(\s*\"([^\"]+)\"\s*,\s*\"?([A-Za-z_][A-Za-z0-9_:]*)",
    re.MULTILINE,
)

_GETRESULT_RE = re.compile(
    r"\bget(Cached)?Result\s*<\s*([A-Za-z_][A-Za-z0-9_]*)\s*[>,]"
)

_RUN_METHOD_RE_TMPL = r"\b{pass_id}\s*::\s*run\b"


@dataclass
class RegistryScan:
    transform_ids: list[str]  # dedup'd, source order
    analysis_ids: list[str]
    registry_strings: dict[str, str]  # class name -> first registry string


@dataclass
class Evidence:
    file: str
    line: int

    def to_json(self) -> dict:
        return {"file": self.file, "line": self.line}


@dataclass
class PassEntry:
    id: str
    desc: str
    deps: list[str]  # sorted analysis class names
    evidence: dict[str, list[Evidence]] = field(default_factory=dict)
    cached_deps: list[str] = field(default_factory=list)  # getCachedResult only

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "desc": self.desc,
            "deps": list(self.deps),
            "evidence": [
                {"dep": dep, "file": ev.file, "line": ev.line}
                for dep in sorted(self.evidence)
                for ev in self.evidence[dep]
            ],
        }


@dataclass
class KnowledgeBase:
    entries: dict[str, PassEntry]
    llvm_version: str = "unknown"
    built_at: str | None = None  # None keeps serialization deterministic

    def to_json(self) -> dict:
        return {
            "llvm_version": self.llvm_version,
            "built_at": self.built_at,
            "entries": [self.entries[k].to_json() for k in sorted(self.entries)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "KnowledgeBase":
        data = json.loads(text)
        entries = {}
        for raw in data["entries"]:
            evidence: dict[str, list[Evidence]] = {}
            for ev in raw.get("evidence", []):
                evidence.setdefault(ev["dep"], []).append(
                    Evidence(file=ev["file"], line=ev["line"])
                )
            entries[raw["id"]] = PassEntry(
                id=raw["id"], desc=raw["desc"], deps=list(raw["deps"]), evidence=evidence
            )
        return cls(
            entries=entries,
            llvm_version=data.get("llvm_version", "unknown"),
            built_at=data.get("built_at"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeBase":
        return cls.loads(Path(path).read_text())


def extract_pass_registry(registry_source: str) -> RegistryScan:
    """Scan PassRegistry.def text for transform and analysis class names."""
    transforms: list[str] = []
    analyses: list[str] = []
    registry_strings: dict[str, str] = {}
    for match in _REGISTRY_RE.finditer(registry_source):
        kind, reg_string, class_name = match.group(2), match.group(4), match.group(5)
        class_name = class_name.split("::")[-1]
        registry_strings.setdefault(class_name, reg_string)
        target = analyses if kind == "ANALYSIS" else transforms
        if class_name not in target:
            target.append(class_name)
    if not transforms and not analyses:
        raise ParseError("no recognizable pass registry entries in input")
    return RegistryScan(
        transform_ids=transforms,
        analysis_ids=analyses,
        registry_strings=registry_strings,
    )


def extract_deps(
    pass_id: str,
    transforms_source_root: str | Path,
    analysis_registry: set[str] | None = None,
    include_cached: bool = False,
) -> tuple[list[str], dict[str, list[Evidence]], list[str]]:
    """Analysis dependencies of one pass, with per-dep source evidence.

    Candidate implementation files: any file under the source root whose
    stem equals the pass name (with or without the trailing "Pass"), or
    whose text defines ``<pass_id>::run``.

    Returns (deps, evidence, cached_only_deps).
    """
    root = Path(transforms_source_root)
    stem_names = {pass_id}
    if pass_id.endswith("Pass"):
        stem_names.add(pass_id[: -len("Pass")])
    run_re = re.compile(_RUN_METHOD_RE_TMPL.format(pass_id=re.escape(pass_id)))

    candidates: list[Path] = []
    for path in sorted(root.rglob("*.cpp")):
        if path.stem in stem_names:
            candidates.append(path)
            continue
        try:
            if run_re.search(path.read_text(errors="replace")):
                candidates.append(path)
        except OSError:
            continue
    if not candidates:
        raise SourceNotFound(f"no implementation file found for {pass_id} under {root}")

    deps: dict[str, list[Evidence]] = {}
    cached: dict[str, list[Evidence]] = {}
    for path in candidates:
        text = path.read_text(errors="replace")
        for lineno, line in enumerate(text.splitlines(), start=1):
            for match in _GETRESULT_RE.finditer(line):
                is_cached, name = bool(match.group(1)), match.group(2)
                if analysis_registry is not None and name not in analysis_registry:
                    if not name.endswith("Analysis"):
                        continue
                bucket = cached if is_cached else deps
                bucket.setdefault(name, []).append(
                    Evidence(file=str(path.relative_to(root)), line=lineno)
                )
    if include_cached:
        for name, evs in cached.items():
            deps.setdefault(name, []).extend(evs)
        cached = {}
    if not deps and not cached:
        logger.warning("pass %s has no getResult call sites", pass_id)
    cached_only = sorted(set(cached) - set(deps))
    return sorted(deps), deps, cached_only


_DOC_SECTION_RE = re.compile(
    r"^``-?(?P<name>[\w-]+)``\s*:\s*(?P<title>.+?)\s*$", re.MULTILINE
)


def attach_descriptions(
    ids: list[str],
    docs_source: str,
    registry_strings: dict[str, str] | None = None,
) -> dict[str, str]:
    """Map every pass id to a documentation paragraph or a fallback blurb.

    The docs format is the reStructuredText used by the LLVM pass docs:
    sections headed ``\\`\\`-pass-name\\`\\`: Title`` followed by prose.  Ids
    missing from the docs get a fallback built from their registry string so
    retrieval never indexes an empty document.
    """
    registry_strings = registry_strings or {}
    sections: dict[str, str] = {}
    matches = list(_DOC_SECTION_RE.finditer(docs_source))
    for i, match in enumerate(matches):
        start = match.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(docs_source)
        body = docs_source[start:end]
        # Drop the underline decoration directly below the section title.
        paragraph_lines = [
            line
            for line in body.splitlines()
            if line.strip() and not set(line.strip()) <= set("-=^~\"'")
        ]
        paragraph = " ".join(line.strip() for line in paragraph_lines)
        sections[match.group("name")] = (
            f"{match.group('title').strip()}. {paragraph}".strip()
        )

    result = {}
    for pass_id in ids:
        reg = registry_strings.get(pass_id, "")
        if reg and reg in sections:
            result[pass_id] = sections[reg]
        else:
            label = reg or pass_id
            result[pass_id] = f"LLVM transform pass '{label}' ({pass_id})."
    return result


def detect_llvm_version(llvm_source_root: str | Path) -> str:
    """Best-effort version sniff from the source tree's CMake metadata."""
    root = Path(llvm_source_root)
    for cmake in (root / "CMakeLists.txt", root / "llvm" / "CMakeLists.txt"):
        if not cmake.exists():
            continue
        text = cmake.read_text(errors="replace")
        parts = {}
        for key in ("MAJOR", "MINOR", "PATCH"):
            m = re.search(rf"LLVM_VERSION_{key}\s+(\d+)", text)
            if m:
                parts[key] = m.group(1)
        if parts:
            return ".".join(parts.get(k, "0") for k in ("MAJOR", "MINOR", "PATCH"))
    return "unknown"


def build_kb(
    llvm_source_root: str | Path,
    docs_source: str = "",
    include_cached: bool = False,
    llvm_version: str | None = None,
) -> KnowledgeBase:
    """Compose registry scan, dep extraction, and description attachment."""
    root = Path(llvm_source_root)
    registry_path = None
    for candidate in (
        root / "llvm" / "lib" / "Passes" / "PassRegistry.def",
        root / "lib" / "Passes" / "PassRegistry.def",
    ):
        if candidate.exists():
            registry_path = candidate
            break
    if registry_path is None:
        raise BuildEmpty(f"no PassRegistry.def under {root}")
    scan = extract_pass_registry(registry_path.read_text(errors="replace"))

    transforms_root = registry_path.parent.parent / "Transforms"
    analysis_registry = set(scan.analysis_ids)
    descriptions = attach_descriptions(
        scan.transform_ids, docs_source, scan.registry_strings
    )

    entries: dict[str, PassEntry] = {}
    for pass_id in scan.transform_ids:
        try:
            deps, evidence, cached_only = extract_deps(
                pass_id,
                transforms_root,
                analysis_registry=analysis_registry,
                include_cached=include_cached,
            )
        except SourceNotFound:
            logger.warning("no source located for %s; entry has empty deps", pass_id)
            deps, evidence, cached_only = [], {}, []
        entries[pass_id] = PassEntry(
            id=pass_id,
            desc=descriptions[pass_id],
            deps=deps,
            evidence=evidence,
            cached_deps=cached_only,
        )
    if not entries:
        raise BuildEmpty(f"zero knowledge-base entries extracted from {root}")
    return KnowledgeBase(
        entries=entries,
        llvm_version=llvm_version or detect_llvm_version(root),
    )
