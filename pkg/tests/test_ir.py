import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intopt.errors import EmptyInput, InvalidIr, OverCap
from intopt.ir import (
    DEFAULT_TOKEN_CAP,
    IrPair,
    IrProgram,
    Origin,
    compile_o3_reference,
    default_token_count,
    enforce_token_cap,
    load_ir,
    public_symbols,
    validate_ir,
)


def oracle_token_count(text: str) -> int:
    """Independent reference: walk characters by hand."""
    count = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if re.match(r"[A-Za-z0-9_]", ch):
            while i < len(text) and re.match(r"[A-Za-z0-9_]", text[i]):
                i += 1
            count += 1
        else:
            i += 1
            count += 1
    return count


@given(st.text(max_size=300))
def test_token_count_matches_oracle(text):
    assert default_token_count(text) == oracle_token_count(text)


def test_token_count_examples():
    assert default_token_count("define i32 @f(i32 %x)") == 9
    assert default_token_count("") == 0
    assert default_token_count("   \n\t ") == 0


def test_load_ir_empty_raises(tmp_path):
    empty = tmp_path / "empty.ll"
    empty.write_text("")
    with pytest.raises(EmptyInput):
        load_ir(empty)


def test_load_ir_sets_id_and_tokens(tmp_path):
    path = tmp_path / "prog.ll"
    path.write_text("define void @f() {\nentry:\n  ret void\n}\n")
    program = load_ir(path)
    assert program.id == "prog"
    assert program.token_count == oracle_token_count(path.read_text())
    assert program.origin == Origin.INPUT


def test_public_symbols_skips_hidden_linkage():
    text = (
        "define i32 @pub(i32 %x) {\nentry:\n  ret i32 %x\n}\n"
        "define internal i32 @hidden(i32 %x) {\nentry:\n  ret i32 %x\n}\n"
        "define private void @also_hidden() {\nentry:\n  ret void\n}\n"
        "declare i32 @decl(i32)\n"
    )
    assert public_symbols(text) == {"pub"}


def test_symbol_mismatch_tolerates_opt_suffix():
    unopt = IrProgram.from_text("a", "define i32 @f(i32 %x) {\nentry:\n  ret i32 %x\n}\n")
    opt = IrProgram.from_text("b", "define i32 @f_opt(i32 %x) {\nentry:\n  ret i32 %x\n}\n")
    assert IrPair(unopt=unopt, opt=opt).symbol_mismatch() == set()
    other = IrProgram.from_text("c", "define i32 @g(i32 %x) {\nentry:\n  ret i32 %x\n}\n")
    assert IrPair(unopt=unopt, opt=other).symbol_mismatch() == {"f", "g"}


def test_validate_ir_accepts_fixture(sum_squares, toolchain):
    validate_ir(sum_squares, toolchain)
    assert sum_squares.valid is True


def test_validate_ir_rejects_garbage(toolchain):
    bad = IrProgram.from_text("bad", "define i32 @f( {\n  this is not IR\n")
    with pytest.raises(InvalidIr):
        validate_ir(bad, toolchain)
    assert bad.valid is False


def _pair_of_counts(n_unopt: int, n_opt: int) -> IrPair:
    unopt = IrProgram(id="u", text="", token_count=n_unopt)
    opt = IrProgram(id="o", text="", token_count=n_opt)
    return IrPair(unopt=unopt, opt=opt)


def test_token_cap_is_on_the_pair_sum():
    enforce_token_cap(_pair_of_counts(2500, 2500))
    with pytest.raises(OverCap) as exc:
        enforce_token_cap(_pair_of_counts(2500, 2501))
    assert exc.value.actual == 5001
    assert exc.value.cap == DEFAULT_TOKEN_CAP


def test_token_cap_rejects_nonpositive():
    with pytest.raises(ValueError):
        enforce_token_cap(_pair_of_counts(1, 1), cap=0)


@given(st.integers(1, 10_000), st.integers(0, 6000), st.integers(0, 6000))
def test_token_cap_property(cap, a, b):
    pair = _pair_of_counts(a, b)
    if a + b <= cap:
        enforce_token_cap(pair, cap)
    else:
        with pytest.raises(OverCap):
            enforce_token_cap(pair, cap)


def test_o3_reference_is_semantically_cleaned(sum_squares, toolchain):
    o3 = compile_o3_reference(sum_squares, toolchain)
    assert o3.origin == Origin.O3_REFERENCE
    assert "@sum_squares" in o3.text
    # O3 removes the stack traffic from the fixture.
    assert "alloca" not in o3.text
    validate_ir(o3, toolchain)
