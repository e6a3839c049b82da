"""The three-stage optimization core, plus the single-call baseline mode and
the training-triple distillation flow.

Stage outputs are parsed into structured strategies for retrieval and
logging, but the verbatim model text is always preserved: the realization
prompt consumes the raw advice region, not the parsed form.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from .analysis import AnalysisBundle, render_bundle
from .errors import MalformedStrategy, NoCodeRegion
from .ir import IrPair, IrProgram, Origin, Provenance, default_token_count, enforce_token_cap
from .llm import BackendConfig, LlmRequest, complete
from .prompts import StagePromptSet, extract_tag, render, strip_code_fences

logger = logging.getLogger(__name__)


class Stage(str, Enum):
    INITIAL = "initial"
    REFINED = "refined"


@dataclass
class TransformationAction:
    transformation: str
    change: str
    raw: str


@dataclass
class OptimizationStrategy:
    actions: list[TransformationAction]
    stage: Stage
    raw_text: str

    def action_texts(self) -> list[str]:
        return [f"{a.transformation} {a.change}".strip() for a in self.actions]

    def to_json(self) -> dict:
        return {
            "stage": self.stage.value,
            "actions": [
                {"transformation": a.transformation, "change": a.change}
                for a in self.actions
            ],
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_json(cls, data: dict) -> "OptimizationStrategy":
        return cls(
            actions=[
                TransformationAction(a["transformation"], a["change"], raw="")
                for a in data["actions"]
            ],
            stage=Stage(data["stage"]),
            raw_text=data.get("raw_text", ""),
        )


_STEP_RE = re.compile(r"<step>(.*?)</step>", re.DOTALL)
_FIELD_RE = re.compile(
    r"\*\*Transformation\*\*\s*:\s*(?P<transformation>.*?)\s*"
    r"\*\*Change\*\*\s*:\s*(?P<change>.*?)\s*$",
    re.DOTALL,
)


def parse_step_blocks(region: str) -> list[TransformationAction]:
    actions = []
    for match in _STEP_RE.finditer(region):
        raw = match.group(1).strip()
        fields = _FIELD_RE.search(raw)
        if not fields:
            continue
        transformation = " ".join(fields.group("transformation").split())
        change = " ".join(fields.group("change").split())
        if transformation and change:
            actions.append(TransformationAction(transformation, change, raw=raw))
    return actions


def parse_bullet_advice(advice: str) -> list[TransformationAction]:
    """Split a free-form bulleted advice region into actions.

    Top-level "- " bullets start actions; the first sentence of a bullet is
    the transformation name, the remainder (including sub-bullets) the change.
    """
    actions = []
    current: list[str] = []
    for line in advice.splitlines():
        if re.match(r"-\s+\S", line):
            if current:
                actions.append(_bullet_to_action("\n".join(current)))
            current = [line]
        elif current:
            current.append(line)
    if current:
        actions.append(_bullet_to_action("\n".join(current)))
    return [a for a in actions if a.transformation]


def _bullet_to_action(raw: str) -> TransformationAction:
    head = raw.lstrip("- ").strip()
    split = re.split(r"(?<=[.:])\s", head, maxsplit=1)
    transformation = " ".join(split[0].rstrip(".:").split())
    change = " ".join(split[1].split()) if len(split) > 1 else ""
    return TransformationAction(transformation, change, raw=raw)


def formulate(
    program: IrProgram,
    backend: BackendConfig,
    prompts: StagePromptSet | None = None,
) -> OptimizationStrategy:
    """Generate the initial strategy for *program*."""
    prompts = prompts or StagePromptSet.default()
    prompt = render(prompts.formulation_template, ir=program.text)
    response = complete(
        LlmRequest(backend_id=backend.backend_id, prompt=prompt, purpose="formulation"),
        backend,
    )
    region = extract_tag(response, "code")
    actions = parse_step_blocks(region if region is not None else response)
    if not actions:
        raise MalformedStrategy(
            f"no parseable <step> blocks in formulation output for {program.id}",
            raw=response,
        )
    return OptimizationStrategy(actions=actions, stage=Stage.INITIAL, raw_text=response)


def refine(
    program: IrProgram,
    strategy: OptimizationStrategy,
    bundle: AnalysisBundle,
    backend: BackendConfig,
    prompts: StagePromptSet | None = None,
) -> OptimizationStrategy:
    """Ground the initial strategy in collected analysis text."""
    if strategy.stage != Stage.INITIAL:
        raise ValueError("refine expects an initial-stage strategy")
    prompts = prompts or StagePromptSet.default()
    prompt = render(
        prompts.refinement_template,
        code=program.text,
        advice=_advice_slot(strategy),
        analysis=render_bundle(bundle),
    )
    response = complete(
        LlmRequest(backend_id=backend.backend_id, prompt=prompt, purpose="refinement"),
        backend,
    )
    region = extract_tag(response, "advice")
    if region is None:
        raise MalformedStrategy(
            f"no <advice> region in refinement output for {program.id}", raw=response
        )
    actions = parse_bullet_advice(region)
    return OptimizationStrategy(actions=actions, stage=Stage.REFINED, raw_text=region)


def _advice_slot(strategy: OptimizationStrategy) -> str:
    """Initial strategies are re-rendered as their verbatim step blocks."""
    if strategy.stage == Stage.INITIAL:
        return "\n".join(f"<step>\n{a.raw}\n</step>" for a in strategy.actions)
    return strategy.raw_text


def realize(
    program: IrProgram,
    strategy: OptimizationStrategy,
    bundle: AnalysisBundle,
    backend: BackendConfig,
    prompts: StagePromptSet | None = None,
    toolchain=None,
) -> IrProgram:
    """Apply the refined strategy, returning the generated IR.

    IR that fails the verifier is returned flagged invalid rather than
    dropped; the verification stage decides its fate.
    """
    if strategy.stage != Stage.REFINED:
        raise ValueError("realize expects a refined-stage strategy")
    prompts = prompts or StagePromptSet.default()
    prompt = render(
        prompts.realization_template,
        code=program.text,
        advice=strategy.raw_text,
        analysis=render_bundle(bundle),
    )
    response = complete(
        LlmRequest(backend_id=backend.backend_id, prompt=prompt, purpose="realization"),
        backend,
    )
    return _ir_from_response(response, program.id, toolchain)


def optimize_end_to_end_baseline(
    program: IrProgram,
    backend: BackendConfig,
    prompts: StagePromptSet | None = None,
    toolchain=None,
) -> IrProgram:
    """Single-call baseline: one prompt, extract the IR, done."""
    prompts = prompts or StagePromptSet.default()
    prompt = render(prompts.baseline_template, code=program.text)
    response = complete(
        LlmRequest(backend_id=backend.backend_id, prompt=prompt, purpose="realization"),
        backend,
    )
    return _ir_from_response(response, program.id, toolchain)


def _ir_from_response(response: str, program_id: str, toolchain) -> IrProgram:
    region = extract_tag(response, "code")
    if region is None or not region.strip():
        raise NoCodeRegion(f"no <code> region in model output for {program_id}", raw=response)
    text = strip_code_fences(region.strip("\n")) + "\n"
    result = IrProgram.from_text(id=program_id, text=text, origin=Origin.LLM_GENERATED)
    if toolchain is not None:
        from .ir import validate_ir
        from .errors import InvalidIr

        try:
            validate_ir(result, toolchain)
        except InvalidIr as exc:
            logger.warning("generated IR for %s fails the verifier: %s", program_id, exc)
            result.valid = False
    return result


def distill_strategy(
    pair: IrPair,
    backend: BackendConfig,
    prompts: StagePromptSet | None = None,
    token_cap: int | None = None,
) -> tuple[IrPair, OptimizationStrategy]:
    """Infer the strategy behind a compiler-produced pair (training triple)."""
    if pair.provenance != Provenance.COMPILER_O3:
        raise ValueError("distillation expects a compiler-produced pair")
    if token_cap is not None:
        enforce_token_cap(pair, token_cap)
    prompts = prompts or StagePromptSet.default()
    prompt = render(prompts.distillation_template, ir=pair.unopt.text, code=pair.opt.text)
    response = complete(
        LlmRequest(backend_id=backend.backend_id, prompt=prompt, purpose="distillation"),
        backend,
    )
    region = extract_tag(response, "code")
    actions = parse_step_blocks(region if region is not None else response)
    if not actions:
        raise MalformedStrategy(
            f"no parseable <step> blocks in distillation output for {pair.unopt.id}",
            raw=response,
        )
    strategy = OptimizationStrategy(actions=actions, stage=Stage.INITIAL, raw_text=response)
    return pair, strategy


def triple_to_jsonl(pair: IrPair, strategy: OptimizationStrategy) -> str:
    """One training triple as a JSONL line."""
    return json.dumps(
        {
            "unopt": pair.unopt.text,
            "opt": pair.opt.text,
            "strategy": strategy.to_json(),
        },
        ensure_ascii=False,
    )
