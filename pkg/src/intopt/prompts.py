"""Prompt templates and response-region extraction.

Templates live as data files with named slots ({ir}, {advice}, {analysis},
{code}); rendering substitutes every slot in a single pass, so slot-like
text inside the filled content is never re-expanded.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources

logger = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"\{(ir|advice|analysis|code)\}")


def _load(name: str) -> str:
    return resources.files("intopt.data").joinpath(name).read_text()


@dataclass
class StagePromptSet:
    formulation_template: str
    refinement_template: str
    realization_template: str
    baseline_template: str
    distillation_template: str
    fuzz_harness_template: str

    @classmethod
    def default(cls) -> "StagePromptSet":
        return cls(
            formulation_template=_load("formulation.txt"),
            refinement_template=_load("refinement.txt"),
            realization_template=_load("realization.txt"),
            baseline_template=_load("baseline.txt"),
            distillation_template=_load("distillation.txt"),
            fuzz_harness_template=_load("fuzz_harness.txt"),
        )


def render(template: str, **slots: str) -> str:
    """Fill named slots; unknown slots in *slots* are an error, missing ones stay."""
    def repl(match: re.Match) -> str:
        name = match.group(1)
        return slots.get(name, match.group(0))

    return _SLOT_RE.sub(repl, template)


def extract_tag(text: str, tag: str) -> str | None:
    """First well-nested <tag>...</tag> region; extras are logged.

    Returns the region's inner text, or None when no complete region exists.
    """
    open_tok, close_tok = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tok)
    if start < 0:
        return None
    depth = 0
    pos = start
    token_re = re.compile(re.escape(open_tok) + "|" + re.escape(close_tok))
    for match in token_re.finditer(text, start):
        if match.group(0) == open_tok:
            depth += 1
        else:
            depth -= 1
            if depth == 0:
                inner = text[start + len(open_tok) : match.start()]
                if text.find(open_tok, match.end()) >= 0:
                    logger.info("multiple <%s> regions; using the first", tag)
                return inner
        pos = match.end()
    return None


_FENCE_RE = re.compile(r"^\s*```[\w+-]*\n(.*?)\n```\s*$", re.DOTALL)


def strip_code_fences(text: str) -> str:
    """Remove a markdown fence wrapping the whole region, if present."""
    match = _FENCE_RE.match(text)
    if match:
        logger.info("stripped markdown code fence from model output")
        return match.group(1)
    return text
