"""Tests for the shared domain types and the ledger payload codecs."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metamorph import model
from metamorph.errors import ConfigError
from metamorph.model import (
    CandidateSolution,
    DescriptionVariant,
    ExpectedState,
    MRTarget,
    Origin,
    RunMetrics,
    Task,
    VariantSource,
    VariantStatus,
    from_payload,
    mr_from_code,
    pass_upper_bound_check,
    payload_of,
)
from metamorph.testcases import parse_test_case


class TestCatalog:
    def test_nine_relations(self):
        assert sorted(model.MR_CATALOG) == [f"MR{i}" for i in range(1, 10)]

    def test_target_partition_is_total(self):
        for code, mr in model.MR_CATALOG.items():
            n = int(code[2:])
            expected = MRTarget.DESCRIPTION if n <= 4 else MRTarget.TEST_CASE
            assert mr.target is expected

    def test_fixed_name_mapping(self):
        assert model.MR1.name == "Negation"
        assert model.MR2.name == "Translation"
        assert model.MR4.name == "Paraphrasing"
        assert model.MR5.name == "Variable Swapping"
        assert model.MR6.name == "Input Permutation"
        assert model.MR9.name == "Incremental Data"

    def test_mr_from_code_accepts_both_spellings(self):
        assert mr_from_code("MR5") is model.MR5
        assert mr_from_code("5") is model.MR5
        assert mr_from_code(5) is model.MR5

    def test_mr_from_code_rejects_unknown(self):
        with pytest.raises(ConfigError):
            mr_from_code("MR12")
        with pytest.raises(ConfigError):
            mr_from_code("bogus")


class TestOrigin:
    def test_labels(self):
        assert Origin.base().label == "Base"
        assert Origin.cma().label == "CMA"
        assert Origin.single(model.MR3).label == "MR3"

    def test_single_requires_mr(self):
        with pytest.raises(ValueError):
            Origin("mr", None)

    def test_base_refuses_mr(self):
        with pytest.raises(ValueError):
            Origin("base", model.MR1)


class TestUpperBoundCheck:
    def test_paper_shaped_row(self):
        m = RunMetrics(0.60, 0.61, 99.4, 93.1, 205, 287)
        assert pass_upper_bound_check(m)

    def test_all_zero_edge(self):
        m = RunMetrics(0.0, 0.0, 0.0, 0.0, 0, 0)
        assert pass_upper_bound_check(m)

    def test_ordering_violation(self):
        m = RunMetrics(0.7, 0.6, 50.0, 50.0, 1, 1)
        assert not pass_upper_bound_check(m)

    def test_out_of_range_percentage(self):
        m = RunMetrics(0.1, 0.2, 101.0, 50.0, 1, 1)
        assert not pass_upper_bound_check(m)


mr_kinds = st.sampled_from(sorted(model.MR_CATALOG.values(), key=lambda m: m.code))
desc_mrs = st.sampled_from([model.MR1, model.MR2, model.MR3, model.MR4])
test_mrs = st.sampled_from([model.MR5, model.MR6, model.MR7, model.MR8, model.MR9])
idents = st.text(alphabet="abcdefgh_", min_size=1, max_size=10)

tasks = st.builds(
    Task,
    id=idents,
    description=st.text(max_size=40),
    entry_point=idents,
    oracle_solution=st.text(max_size=40),
    oracle_tests=st.lists(st.text(max_size=20), max_size=4).map(tuple),
    dataset=st.sampled_from(["humaneval-pro", "mbpp-pro", "custom"]),
)

description_variants = st.builds(
    DescriptionVariant,
    task_id=idents,
    mr=desc_mrs,
    text=st.text(min_size=1, max_size=40),
    similarity=st.one_of(st.none(), st.floats(min_value=0, max_value=1, allow_nan=False)),
    status=st.sampled_from(list(VariantStatus)),
    attempt=st.integers(min_value=1, max_value=3),
)

assertion_cases = st.sampled_from(
    [
        parse_test_case("assert f([1, 2, 3]) == 6"),
        parse_test_case("assert g(2, -0.5, 'x') == [1, (2, 3)]"),
        parse_test_case("assert h(3*(4+5)) == 27"),
        parse_test_case("assert p({'a': 1}, None, True) == {}"),
    ]
)

test_variants = st.builds(
    model.TestVariant,
    origin_index=st.integers(min_value=0, max_value=5),
    mr=test_mrs,
    case=assertion_cases,
    expected_state=st.sampled_from(list(ExpectedState)),
    status=st.sampled_from(list(model.TestStatus)),
    source=st.sampled_from(list(VariantSource)),
    rule=st.one_of(st.none(), st.sampled_from(["swap-first-two", "increment-last"])),
    reason=st.one_of(st.none(), st.text(max_size=20)),
)

origins = st.one_of(
    st.just(Origin.base()),
    st.just(Origin.cma()),
    mr_kinds.map(Origin.single),
)

candidates = st.builds(
    CandidateSolution,
    task_id=idents,
    origin=origins,
    sample_index=st.integers(min_value=0, max_value=9),
    source_code=st.text(max_size=60),
    raw_response_id=st.one_of(st.none(), st.text(alphabet="0123456789abcdef", min_size=8, max_size=8)),
    extraction=st.sampled_from(["fenced", "bare", "none"]),
)

run_metrics = st.builds(
    RunMetrics,
    pass_at_1=st.floats(min_value=0, max_value=1, allow_nan=False),
    pass_at_5=st.floats(min_value=0, max_value=1, allow_nan=False),
    branch_coverage_pct=st.floats(min_value=0, max_value=100, allow_nan=False),
    correctness_rate_pct=st.floats(min_value=0, max_value=100, allow_nan=False),
    tokens_in=st.integers(min_value=0, max_value=10**6),
    tokens_out=st.integers(min_value=0, max_value=10**6),
)

core_objects = st.one_of(
    tasks, description_variants, test_variants, candidates, run_metrics
)


@settings(max_examples=300, deadline=None)
@given(core_objects)
def test_ledger_payload_round_trip(obj):
    kind, payload = payload_of(obj)
    # through real JSON, to catch tuple/dict-key degradation
    wire = json.loads(json.dumps(payload))
    back = from_payload(kind, wire)
    assert back == obj


def test_payload_kinds_are_stable():
    task = Task("t1", "d", "f", "def f(): pass", ("assert f() == 0",))
    assert payload_of(task)[0] == "task"
    variant = DescriptionVariant("t1", model.MR3, "steps", 0.9, VariantStatus.ACCEPTED, 1)
    assert payload_of(variant)[0] == "description_variant"
    metrics = RunMetrics(0.5, 0.6, 90.0, 100.0, 10, 20)
    assert payload_of(metrics)[0] == "run_metrics"


def test_unknown_kind_rejected():
    with pytest.raises(KeyError):
        from_payload("no_such_kind", {})
