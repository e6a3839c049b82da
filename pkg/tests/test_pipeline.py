"""Three-stage optimization pipeline: parsing, staging, replay-driven runs."""

import json

import pytest

from intopt.analysis import AnalysisBundle, AnalysisItem, render_bundle
from intopt.errors import MalformedStrategy, NoCodeRegion
from intopt.ir import IrPair, IrProgram, Origin, Provenance
from intopt.llm import BackendConfig, LlmRequest, TranscriptStore
from intopt.pipeline import (
    OptimizationStrategy,
    Stage,
    distill_strategy,
    formulate,
    optimize_end_to_end_baseline,
    parse_bullet_advice,
    parse_step_blocks,
    realize,
    refine,
    triple_to_jsonl,
)
from intopt.prompts import StagePromptSet, render

STEP_REGION = """
<step>
**Transformation**: Loop strength reduction
**Change**: replace the multiply in the induction update with an add
</step>
noise between blocks
<step>
**Transformation**: Dead store elimination
**Change**: drop the store to %tmp that is never read
</step>
"""

ADVICE_REGION = """- Promote the accumulator to a register. The alloca/load/store
  round-trips in the loop body defeat later passes.
- Hoist the loop-invariant bound computation: it only depends on %n.
"""

OPTIMIZED_IR = """define i32 @target(i32 %x) {
entry:
  %r = shl i32 %x, 1
  ret i32 %r
}
"""


def test_parse_step_blocks():
    actions = parse_step_blocks(STEP_REGION)
    assert [a.transformation for a in actions] == [
        "Loop strength reduction",
        "Dead store elimination",
    ]
    assert actions[0].change.startswith("replace the multiply")
    assert "**Transformation**" in actions[0].raw


def test_parse_step_blocks_skips_malformed():
    region = "<step>free text without the two fields</step>" + STEP_REGION
    assert len(parse_step_blocks(region)) == 2
    assert parse_step_blocks("no blocks at all") == []


def test_parse_bullet_advice():
    actions = parse_bullet_advice(ADVICE_REGION)
    assert len(actions) == 2
    assert actions[0].transformation == "Promote the accumulator to a register"
    assert actions[0].change.startswith("The alloca/load/store")
    # Continuation lines belong to the bullet that opened them.
    assert "round-trips" in actions[0].raw
    assert actions[1].transformation.startswith("Hoist the loop-invariant")


def test_strategy_json_roundtrip():
    strategy = OptimizationStrategy(
        actions=parse_step_blocks(STEP_REGION), stage=Stage.INITIAL, raw_text="raw"
    )
    again = OptimizationStrategy.from_json(strategy.to_json())
    assert again.stage == strategy.stage
    assert again.action_texts() == strategy.action_texts()


@pytest.fixture
def prompts():
    return StagePromptSet.default()


@pytest.fixture
def bundle():
    return AnalysisBundle(
        for_program="target",
        items=[AnalysisItem("LoopAnalysis", "print<loops>", "function", "Loop info", "ok")],
    )


def _replay_backend(tmp_path, entries):
    """Record canned (prompt, response) pairs and return a replay backend."""
    store = TranscriptStore(tmp_path / "transcripts")
    for prompt, response in entries:
        store.record(LlmRequest(backend_id="scripted", prompt=prompt), response)
    return BackendConfig(
        backend_id="scripted", kind="replay", transcript_dir=str(tmp_path / "transcripts")
    )


@pytest.fixture
def program():
    return IrProgram.from_text(
        id="target",
        text="define i32 @target(i32 %x) {\nentry:\n  %r = add i32 %x, %x\n  ret i32 %r\n}\n",
        origin=Origin.INPUT,
    )


def test_formulate_via_replay(tmp_path, prompts, program):
    prompt = render(prompts.formulation_template, ir=program.text)
    backend = _replay_backend(tmp_path, [(prompt, f"<code>{STEP_REGION}</code>")])
    strategy = formulate(program, backend, prompts)
    assert strategy.stage == Stage.INITIAL
    assert len(strategy.actions) == 2


def test_formulate_rejects_unparseable_output(tmp_path, prompts, program):
    prompt = render(prompts.formulation_template, ir=program.text)
    backend = _replay_backend(tmp_path, [(prompt, "<code>nothing useful</code>")])
    with pytest.raises(MalformedStrategy):
        formulate(program, backend, prompts)


def test_refine_via_replay(tmp_path, prompts, program, bundle):
    initial = OptimizationStrategy(
        actions=parse_step_blocks(STEP_REGION), stage=Stage.INITIAL, raw_text="x"
    )
    advice_slot = "\n".join(f"<step>\n{a.raw}\n</step>" for a in initial.actions)
    prompt = render(
        prompts.refinement_template,
        code=program.text,
        advice=advice_slot,
        analysis=render_bundle(bundle),
    )
    backend = _replay_backend(tmp_path, [(prompt, f"<advice>{ADVICE_REGION}</advice>")])
    refined = refine(program, initial, bundle, backend, prompts)
    assert refined.stage == Stage.REFINED
    assert len(refined.actions) == 2
    assert refined.raw_text == ADVICE_REGION


def test_refine_rejects_wrong_stage(tmp_path, prompts, program, bundle):
    refined = OptimizationStrategy(actions=[], stage=Stage.REFINED, raw_text="")
    backend = BackendConfig(backend_id="scripted", kind="replay", transcript_dir=str(tmp_path))
    with pytest.raises(ValueError):
        refine(program, refined, bundle, backend, prompts)


def test_realize_via_replay(tmp_path, prompts, program, bundle, toolchain):
    refined = OptimizationStrategy(
        actions=parse_bullet_advice(ADVICE_REGION),
        stage=Stage.REFINED,
        raw_text=ADVICE_REGION,
    )
    prompt = render(
        prompts.realization_template,
        code=program.text,
        advice=ADVICE_REGION,
        analysis=render_bundle(bundle),
    )
    backend = _replay_backend(
        tmp_path, [(prompt, f"preamble\n<code>\n{OPTIMIZED_IR}</code>\n")]
    )
    result = realize(program, refined, bundle, backend, prompts, toolchain=toolchain)
    assert result.id == program.id
    assert result.origin == Origin.LLM_GENERATED
    assert result.valid
    assert "shl i32" in result.text


def test_realize_flags_invalid_ir_instead_of_dropping(
    tmp_path, prompts, program, bundle, toolchain
):
    refined = OptimizationStrategy(
        actions=[], stage=Stage.REFINED, raw_text=ADVICE_REGION
    )
    prompt = render(
        prompts.realization_template,
        code=program.text,
        advice=ADVICE_REGION,
        analysis=render_bundle(bundle),
    )
    backend = _replay_backend(tmp_path, [(prompt, "<code>define garbage</code>")])
    result = realize(program, refined, bundle, backend, prompts, toolchain=toolchain)
    assert result.valid is False


def test_realize_requires_code_region(tmp_path, prompts, program, bundle):
    refined = OptimizationStrategy(
        actions=[], stage=Stage.REFINED, raw_text=ADVICE_REGION
    )
    prompt = render(
        prompts.realization_template,
        code=program.text,
        advice=ADVICE_REGION,
        analysis=render_bundle(bundle),
    )
    backend = _replay_backend(tmp_path, [(prompt, "sorry, no code today")])
    with pytest.raises(NoCodeRegion):
        realize(program, refined, bundle, backend, prompts)


def test_baseline_single_call(tmp_path, prompts, program, toolchain):
    prompt = render(prompts.baseline_template, code=program.text)
    backend = _replay_backend(
        tmp_path, [(prompt, f"<code>```llvm\n{OPTIMIZED_IR}```</code>")]
    )
    result = optimize_end_to_end_baseline(program, backend, prompts, toolchain=toolchain)
    # The markdown fence is stripped before validation.
    assert result.valid
    assert result.text.startswith("define i32 @target")


def test_distill_strategy_and_jsonl(tmp_path, prompts, program):
    opt = IrProgram.from_text(id="target", text=OPTIMIZED_IR, origin=Origin.O3_REFERENCE)
    pair = IrPair(unopt=program, opt=opt, provenance=Provenance.COMPILER_O3)
    prompt = render(prompts.distillation_template, ir=program.text, code=opt.text)
    backend = _replay_backend(tmp_path, [(prompt, f"<code>{STEP_REGION}</code>")])
    got_pair, strategy = distill_strategy(pair, backend, prompts)
    assert got_pair is pair
    assert strategy.stage == Stage.INITIAL
    line = triple_to_jsonl(pair, strategy)
    data = json.loads(line)
    assert data["unopt"] == program.text
    assert data["opt"] == opt.text
    assert len(data["strategy"]["actions"]) == 2
    assert "\n" not in line.strip()


def test_distill_rejects_non_compiler_pairs(tmp_path, program):
    opt = IrProgram.from_text(id="target", text=OPTIMIZED_IR, origin=Origin.LLM_GENERATED)
    pair = IrPair(unopt=program, opt=opt, provenance=Provenance.LLM_PIPELINE)
    backend = BackendConfig(backend_id="scripted", kind="replay", transcript_dir="x")
    with pytest.raises(ValueError):
        distill_strategy(pair, backend)
