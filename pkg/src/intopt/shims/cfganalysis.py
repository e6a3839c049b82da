"""Dominator-tree and loop-info computation over textual LLVM IR.

Works directly on the textual module: basic blocks are recognized by their
labels and edges by ``br``/``switch`` terminators.  Output mimics the text
the corresponding LLVM printer passes emit, closely enough to feed prompts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_DEFINE_RE = re.compile(r"^define\b[^@]*@([-\w.$]+|\"[^\"]+\")\s*\(")
_LABEL_RE = re.compile(r"^([-\w.$]+):")
_BR_UNCOND_RE = re.compile(r"^\s*br\s+label\s+%([-\w.$]+)")
_BR_COND_RE = re.compile(
    r"^\s*br\s+i1\s+[^,]+,\s*label\s+%([-\w.$]+),\s*label\s+%([-\w.$]+)"
)
_SWITCH_LABEL_RE = re.compile(r"label\s+%([-\w.$]+)")
_INVOKE_RE = re.compile(r"\bto\s+label\s+%([-\w.$]+)\s+unwind\s+label\s+%([-\w.$]+)")


@dataclass
class FunctionCfg:
    name: str
    blocks: list[str]  # in source order; blocks[0] is the entry
    succs: dict[str, list[str]] = field(default_factory=dict)
    preds: dict[str, list[str]] = field(default_factory=dict)


def parse_cfgs(ir_text: str) -> list[FunctionCfg]:
    """Extract one CFG per function definition in a textual module."""
    cfgs = []
    lines = ir_text.splitlines()
    i = 0
    while i < len(lines):
        m = _DEFINE_RE.match(lines[i])
        if not m:
            i += 1
            continue
        name = m.group(1).strip('"')
        body, i = _function_body(lines, i)
        cfgs.append(_build_cfg(name, body))
    return cfgs


def _function_body(lines: list[str], start: int) -> tuple[list[str], int]:
    depth = 0
    body = []
    i = start
    while i < len(lines):
        line = lines[i]
        depth += line.count("{") - line.count("}")
        body.append(line)
        i += 1
        if depth == 0 and "{" in "".join(body):
            break
    return body, i


def _build_cfg(name: str, body: list[str]) -> FunctionCfg:
    blocks: list[str] = []
    succs: dict[str, list[str]] = {}
    current: str | None = None
    # The entry block may be unlabeled; textual IR from opt prints it as a
    # comment label, and hand-written fixtures always label it.  An unlabeled
    # entry gets the synthetic name "entry".
    for raw in body[1:]:
        line = raw.strip()
        label = _LABEL_RE.match(raw)
        if label:
            current = label.group(1)
            blocks.append(current)
            succs[current] = []
            continue
        if current is None and line and not line.startswith((";", "}")):
            current = "0"
            blocks.append(current)
            succs[current] = []
        if current is None:
            continue
        m = _BR_COND_RE.match(raw)
        if m:
            succs[current] = [m.group(1), m.group(2)]
            continue
        m = _BR_UNCOND_RE.match(raw)
        if m:
            succs[current] = [m.group(1)]
            continue
        if line.startswith("switch"):
            succs[current] = _SWITCH_LABEL_RE.findall(line)
            continue
        m = _INVOKE_RE.search(line)
        if m and line.startswith(("invoke", "%")):
            succs[current] = [m.group(1), m.group(2)]
    preds: dict[str, list[str]] = {b: [] for b in blocks}
    for b, ss in succs.items():
        for s in ss:
            if s in preds:
                preds[s].append(b)
    return FunctionCfg(name=name, blocks=blocks, succs=succs, preds=preds)


def immediate_dominators(cfg: FunctionCfg) -> dict[str, str | None]:
    """Iterative dominator computation (Cooper-Harvey-Kennedy)."""
    if not cfg.blocks:
        return {}
    entry = cfg.blocks[0]
    order = _reverse_postorder(cfg, entry)
    index = {b: i for i, b in enumerate(order)}
    idom: dict[str, str | None] = {entry: entry}
    changed = True
    while changed:
        changed = False
        for b in order[1:]:
            candidates = [p for p in cfg.preds.get(b, []) if p in idom]
            if not candidates:
                continue
            new_idom = candidates[0]
            for p in candidates[1:]:
                new_idom = _intersect(p, new_idom, idom, index)
            if idom.get(b) != new_idom:
                idom[b] = new_idom
                changed = True
    idom[entry] = None
    return idom


def _reverse_postorder(cfg: FunctionCfg, entry: str) -> list[str]:
    seen = set()
    post: list[str] = []

    def visit(b: str) -> None:
        stack = [(b, iter(cfg.succs.get(b, [])))]
        seen.add(b)
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(cfg.succs.get(s, []))))
                    advanced = True
                    break
            if not advanced:
                post.append(node)
                stack.pop()

    visit(entry)
    return list(reversed(post))


def _intersect(a: str, b: str, idom: dict, index: dict) -> str:
    while a != b:
        while index.get(a, -1) > index.get(b, -1):
            a = idom[a]
        while index.get(b, -1) > index.get(a, -1):
            b = idom[b]
    return a


def dominates(a: str, b: str, idom: dict[str, str | None]) -> bool:
    node: str | None = b
    while node is not None:
        if node == a:
            return True
        node = idom.get(node)
    return False


@dataclass
class Loop:
    header: str
    blocks: set[str]
    latches: set[str]
    depth: int = 1
    children: list["Loop"] = field(default_factory=list)


def find_loops(cfg: FunctionCfg) -> list[Loop]:
    """Natural loops from back edges, nested by containment."""
    idom = immediate_dominators(cfg)
    by_header: dict[str, Loop] = {}
    for b in cfg.blocks:
        for s in cfg.succs.get(b, []):
            if s in idom and dominates(s, b, idom):
                loop = by_header.setdefault(s, Loop(header=s, blocks={s}, latches=set()))
                loop.latches.add(b)
                loop.blocks |= _natural_loop_body(cfg, s, b)
    loops = list(by_header.values())
    roots: list[Loop] = []
    # Sort innermost-last by body size so parents adopt children greedily.
    for loop in sorted(loops, key=lambda l: len(l.blocks), reverse=True):
        parent = None
        for other in loops:
            if other is loop:
                continue
            if loop.blocks < other.blocks and (
                parent is None or other.blocks < parent.blocks
            ):
                parent = other
        if parent is None:
            roots.append(loop)
        else:
            parent.children.append(loop)
    for root in roots:
        _set_depths(root, 1)
    order = {b: i for i, b in enumerate(cfg.blocks)}
    roots.sort(key=lambda l: order.get(l.header, 0))
    return roots


def _natural_loop_body(cfg: FunctionCfg, header: str, latch: str) -> set[str]:
    body = {header, latch}
    stack = [latch]
    while stack:
        node = stack.pop()
        for p in cfg.preds.get(node, []):
            if p not in body:
                body.add(p)
                stack.append(p)
    return body


def _set_depths(loop: Loop, depth: int) -> None:
    loop.depth = depth
    for child in loop.children:
        _set_depths(child, depth + 1)


def print_domtree(cfg: FunctionCfg) -> str:
    """Text in the shape of LLVM's dominator-tree printer output."""
    idom = immediate_dominators(cfg)
    children: dict[str | None, list[str]] = {}
    for b in cfg.blocks:
        if b in idom:
            children.setdefault(idom[b], []).append(b)
    lines = [
        f"DominatorTree for function: {cfg.name}",
        "=============================--------------------------------",
        "Inorder Dominator Tree: DFSNumbers invalid: 0 slow queries.",
    ]
    order = {b: i for i, b in enumerate(cfg.blocks)}

    def emit(node: str, level: int) -> None:
        lines.append(f"{'  ' * level}[{level}] %{node} {{4294967295,4294967295}} [{level - 1}]")
        for child in sorted(children.get(node, []), key=lambda b: order.get(b, 0)):
            emit(child, level + 1)

    roots = children.get(None, [])
    for root in roots:
        emit(root, 1)
    lines.append("Roots: " + " ".join(f"%{r}" for r in roots))
    return "\n".join(lines) + "\n"


def print_loops(cfg: FunctionCfg) -> str:
    """Text in the shape of LLVM's loop-info printer output."""
    loops = find_loops(cfg)
    lines = [f"Loop info for function '{cfg.name}':"]

    def describe(loop: Loop) -> str:
        order = {b: i for i, b in enumerate(cfg.blocks)}
        parts = []
        for b in sorted(loop.blocks, key=lambda b: order.get(b, 0)):
            tags = ""
            if b == loop.header:
                tags += "<header>"
            exiting = any(s not in loop.blocks for s in cfg.succs.get(b, []))
            if exiting:
                tags += "<exiting>"
            if b in loop.latches:
                tags += "<latch>"
            parts.append(f"%{b}{tags}")
        return ",".join(parts)

    def emit(loop: Loop) -> None:
        indent = "    " * (loop.depth - 1)
        lines.append(f"{indent}Loop at depth {loop.depth} containing: {describe(loop)}")
        for child in loop.children:
            emit(child)

    for loop in loops:
        emit(loop)
    return "\n".join(lines) + "\n"
