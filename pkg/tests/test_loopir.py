import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from smartexec.bench.fixtures import TABLE2, synthesize_loop_spec
from smartexec.bench.kernels import loop_spec_text, matmul_loop_spec
from smartexec.loopir import (
    FEATURE_NAMES, FULL_FEATURE_NAMES, Assign, BinOp, DynamicFeatures, InnerLoop, LoopSpecError,
    ScalarType, StaticFeatures, analyze_statement, full_feature_row, make_feature_vector,
    parse_loop_spec,
)


def counts(text):
    s = analyze_statement(parse_loop_spec(text))
    return s.total_ops, s.float_ops, s.comparison_ops, s.deepest_loop_level


# -- parsing ---------------------------------------------------------------

def test_parse_tree_shape():
    ast = parse_loop_spec("loop N { fvar a; fassign a = a * 2.0; loop 3 { iassign j = j + 1; } }")
    assert ast.trip_count == "N"
    decl, assign, inner = ast.body
    assert isinstance(assign, Assign) and assign.scalar_type is ScalarType.FLOAT
    assert isinstance(assign.rhs, BinOp) and assign.rhs.is_float
    assert isinstance(inner, InnerLoop) and inner.trip_count == 3


def test_literal_outer_trip():
    assert parse_loop_spec("loop 12 { }").trip_count == 12


@pytest.mark.parametrize("text, line, col", [
    ("loop N { fassign x = ; }", 1, 22),
    ("loop N {\n  iassign x = 1\n}", 3, 1),
    ("loop N {\n\n  loop M { }\n}", 3, 8),
    ("loop N { $ }", 1, 10),
    ("loop 0 { }", 1, 6),
    ("loop N { ", 1, 10),
    ("loop N { } extra", 1, 12),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(LoopSpecError) as info:
        parse_loop_spec(text)
    assert (info.value.line, info.value.column) == (line, col)
    assert f"line {line}" in str(info.value)


def test_conflicting_declaration_rejected():
    with pytest.raises(LoopSpecError):
        parse_loop_spec("loop N { ivar a; fvar a; }")
    with pytest.raises(LoopSpecError):
        parse_loop_spec("loop N { ivar a; fassign a = 1.0; }")


def test_comments_ignored():
    assert counts("# head\nloop N { # tail\n fassign x = y; }") == (1, 1, 0, 0)


# -- counting contract -----------------------------------------------------

@pytest.mark.parametrize("text, expected", [
    ("loop N { }", (0, 0, 0, 0)),
    ("loop N { iassign i = j; }", (1, 0, 0, 0)),
    ("loop N { fassign x = y; }", (1, 1, 0, 0)),
    ("loop N { fassign x = y + z; }", (2, 2, 0, 0)),
    ("loop N { iassign i = j + k * 2; }", (3, 0, 0, 0)),
    ("loop N { if (i < j) { } }", (1, 0, 1, 0)),
    ("loop N { fvar x; if (x < 1.0) { } }", (1, 1, 1, 0)),
    ("loop N { if (i < j) { iassign k = 1; } else { iassign k = 2; } }", (3, 0, 1, 0)),
    ("loop N { loop 10 { fassign x = y * z; } }", (20, 20, 0, 1)),
    ("loop N { loop 10 { loop 5 { iassign i = 0; } } }", (50, 0, 0, 2)),
    ("loop N { fassign c[i + 1] = a[i]; }", (2, 1, 0, 0)),
    ("loop N { call f; }", (0, 0, 0, 0)),
])
def test_counting_contract(text, expected):
    assert counts(text) == expected


def test_variable_and_branch_counts():
    s = analyze_statement(parse_loop_spec(
        "loop N { ivar i; fvar a; fassign b = a[i]; if (i > 0) { call g; }"
        " loop 2 { if (i == 1) { call h; } } }"))
    assert (s.num_int_vars, s.num_float_vars) == (1, 2)
    assert (s.num_if, s.num_if_inner, s.num_calls, s.num_calls_inner) == (2, 1, 2, 1)


def test_shipped_stream_spec():
    assert counts(loop_spec_text("stream")) == (8, 8, 0, 0)


def test_shipped_stencil_spec():
    assert counts(loop_spec_text("stencil")) == (3502, 2500, 301, 1)


@pytest.mark.parametrize("k, p", [(1, 1), (16, 16), (256, 256), (3, 7)])
def test_matmul_spec_counts(k, p):
    # per row: p * (1 store of s=0, k * (2 BinOps + 1 store), 1 store of c[j])
    assert counts(matmul_loop_spec(k, p)) == (p * (2 + 3 * k), p * (2 + 3 * k), 0, 2)


@pytest.mark.parametrize("row", TABLE2, ids=lambda r: r.key)
def test_table2_rows_reproduced(row):
    text = synthesize_loop_spec(row.total_ops, row.float_ops, row.comparison_ops, row.loop_level)
    assert counts(text) == (row.total_ops, row.float_ops, row.comparison_ops, row.loop_level)


def test_synthesizer_rejects_impossible_counts():
    with pytest.raises(ValueError):
        synthesize_loop_spec(10, 20, 0, 1)
    with pytest.raises(ValueError):
        synthesize_loop_spec(100, 0, 0, 0)


# -- properties ------------------------------------------------------------

stmt = st.sampled_from([
    "fassign x = y;", "iassign p = q;", "if (p < q) { }", "fassign x = x * y + 1.0;",
    "iassign p = p + q * 2;", "if (x > y) { fassign x = y; }",
])


@settings(max_examples=60, deadline=None)
@given(body=st.lists(stmt, max_size=6), m=st.integers(1, 50))
def test_inner_loop_is_multiplicative(body, m):
    inner = " ".join(body)
    flat = counts("loop N { fvar x; fvar y; " + inner + " }")
    looped = counts(f"loop N {{ fvar x; fvar y; loop {m} {{ {inner} }} }}")
    assert looped[:3] == tuple(m * v for v in flat[:3])


@settings(max_examples=60, deadline=None)
@given(a=st.lists(stmt, max_size=5), b=st.lists(stmt, max_size=5))
def test_counts_are_additive(a, b):
    decl = "fvar x; fvar y; "
    ca = counts("loop N { " + decl + " ".join(a) + " }")
    cb = counts("loop N { " + decl + " ".join(b) + " }")
    cab = counts("loop N { " + decl + " ".join(a + b) + " }")
    assert cab[:3] == tuple(x + y for x, y in zip(ca[:3], cb[:3]))


@settings(max_examples=40, deadline=None)
@given(total=st.integers(0, 10**7), f=st.integers(0, 10**7), c=st.integers(0, 10**7),
       level=st.integers(1, 4))
def test_synthesizer_round_trip(total, f, c, level):
    assume(max(0, f + c - total) <= min(f, c))
    assert counts(synthesize_loop_spec(total, f, c, level)) == (total, f, c, level)


# -- feature vectors -------------------------------------------------------

def test_stream_feature_vector():
    s = analyze_statement(parse_loop_spec(loop_spec_text("stream")))
    x = make_feature_vector(s, DynamicFeatures(16, 50_000_000))
    assert x.dtype == np.float64
    assert x.tolist() == [1, 16, 50_000_000, 8, 8, 0, 0]


def test_table2_first_row_vector():
    r = TABLE2[0]
    s = analyze_statement(parse_loop_spec(
        synthesize_loop_spec(r.total_ops, r.float_ops, r.comparison_ops, r.loop_level)))
    x = make_feature_vector(s, DynamicFeatures(8, r.iterations))
    assert x.tolist() == [1, 8, 10000, 400100, 200000, 101010, 2]


def test_full_row_layout():
    s = StaticFeatures(1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    row = full_feature_row(s, DynamicFeatures(11, 12))
    assert len(row) == len(FULL_FEATURE_NAMES) == 12
    assert row.tolist() == [11, 12, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    assert FEATURE_NAMES[0] == "bias"


def test_dynamic_features_validated():
    with pytest.raises(ValueError):
        DynamicFeatures(0, 10)
    with pytest.raises(ValueError):
        DynamicFeatures(1, 0)
    with pytest.raises(ValueError):
        StaticFeatures(total_ops=-1)
