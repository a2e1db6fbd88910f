"""Evaluator tests.

pass@k is checked against a reference that enumerates every size-k draw
directly, so the closed-form estimator is compared with something it
shares no code with.
"""

import itertools

import pytest

from fixture_programs import (
    OCTAGONAL_CMA_PROGRAM,
    OCTAGONAL_ORG_PROGRAM,
    PALINDROME_PROGRAM,
)
from metamorph import model
from metamorph.errors import DomainError
from metamorph.evaluate import (
    ablate,
    average_pass_rate,
    correctness_rate,
    coverage_of_suite,
    cross_variant_consistency,
    pass_at_k,
    run_candidate,
)
from metamorph.gateway import ChatResult, request_digest
from metamorph.model import MR3, MR4, MR5, CandidateSolution, Origin, Task
from metamorph.sandbox import SandboxClient
from metamorph.testcases import parse_test_case
from test_testcases import GENERATED_LINES, ORACLE_LINES


def brute_pass_at_k(n, c, k):
    """Exact fraction of size-k draws without replacement that contain at
    least one of the c correct samples."""
    correct = [i < c for i in range(n)]
    hits = 0
    total = 0
    for combo in itertools.combinations(range(n), k):
        total += 1
        if any(correct[i] for i in combo):
            hits += 1
    return hits / total


@pytest.fixture(scope="module")
def sandbox():
    client = SandboxClient()
    yield client
    client.close()


def make_candidate(source, task_id="pal", origin=None, sample_index=0):
    return CandidateSolution(
        task_id=task_id,
        origin=origin or Origin.base(),
        sample_index=sample_index,
        source_code=source,
    )


class TestPassAtK:
    def test_all_samples_correct_is_certain(self):
        assert pass_at_k(5, 5, 1) == 1.0

    def test_no_samples_correct_is_impossible(self):
        assert pass_at_k(5, 0, 5) == 0.0

    def test_single_draw_is_the_correct_fraction(self):
        assert pass_at_k(5, 2, 1) == pytest.approx(0.4, abs=1e-12)

    def test_matches_subset_enumeration_up_to_n8(self):
        """Sweep every admissible (n, c, k) with n <= 8 against the
        enumeration reference."""
        for n in range(1, 9):
            for c in range(0, n + 1):
                for k in range(1, n + 1):
                    got = pass_at_k(n, c, k)
                    want = brute_pass_at_k(n, c, k)
                    assert got == pytest.approx(want, abs=1e-12), (n, c, k)

    def test_monotone_in_c_and_k(self):
        for n in range(1, 9):
            for k in range(1, n + 1):
                rates = [pass_at_k(n, c, k) for c in range(0, n + 1)]
                assert rates == sorted(rates)
            for c in range(0, n + 1):
                rates = [pass_at_k(n, c, k) for k in range(1, n + 1)]
                assert rates == sorted(rates)

    @pytest.mark.parametrize(
        "n, c, k",
        [
            (3, 4, 1),
            (3, -1, 1),
            (3, 0, 0),
            (3, 0, 4),
            (-1, 0, 1),
            (0, 0, 1),
        ],
    )
    def test_rejects_inadmissible_arguments(self, n, c, k):
        with pytest.raises(DomainError):
            pass_at_k(n, c, k)

    def test_rejects_non_integer_arguments(self):
        with pytest.raises(DomainError):
            pass_at_k(5.0, 2, 1)
        with pytest.raises(DomainError):
            pass_at_k(5, True, 1)


class TestAveragePassRate:
    def test_averages_per_task_rates(self):
        assert average_pass_rate([(5, 5), (5, 0)], 1) == pytest.approx(0.5)

    def test_matches_single_task_estimator(self):
        got = average_pass_rate([(15, 5)], 5)
        assert got == pytest.approx(brute_pass_at_k(15, 5, 5), abs=1e-12)

    def test_empty_pool_scores_zero(self):
        assert average_pass_rate([(0, 0), (5, 5)], 1) == pytest.approx(0.5)

    def test_k_clamps_to_pool_size(self):
        # Drawing more samples than the pool holds degenerates to "any
        # correct sample at all".
        assert average_pass_rate([(3, 2)], 5) == 1.0
        assert average_pass_rate([(3, 0)], 5) == 0.0

    def test_rejects_empty_task_list(self):
        with pytest.raises(DomainError):
            average_pass_rate([], 1)

    def test_rejects_bad_k(self):
        with pytest.raises(DomainError):
            average_pass_rate([(5, 5)], 0)


class TestRunCandidate:
    def test_correct_program_passes_all_tests(self, sandbox):
        report = run_candidate(
            make_candidate(PALINDROME_PROGRAM), ORACLE_LINES, sandbox
        )
        assert report.passed
        assert report.pass_count == 4
        assert report.test_count == 4
        assert report.coverage is None
        assert all(r.status == "pass" for r in report.results)

    def test_wrong_program_fails_most_tests(self, sandbox):
        stub = "def sum_of_next_smallest_palindromes(nums):\n    return 0\n"
        report = run_candidate(make_candidate(stub), ORACLE_LINES, sandbox)
        # The empty-list case still holds for the constant-zero stub.
        assert not report.passed
        assert report.pass_count == 1

    def test_broken_program_reports_errors(self, sandbox):
        report = run_candidate(
            make_candidate("def f(:\n"), ORACLE_LINES, sandbox
        )
        assert not report.passed
        assert all(r.status == "error" for r in report.results)

    def test_coverage_attached_on_request(self, sandbox):
        report = run_candidate(
            make_candidate(PALINDROME_PROGRAM),
            ORACLE_LINES,
            sandbox,
            want_coverage=True,
        )
        assert report.coverage is not None
        assert report.coverage.branch_total == 14
        assert report.coverage.branch_pct == pytest.approx(1200 / 14)

    def test_empty_source_is_rejected_without_execution(self):
        # sandbox=None proves the precondition fires before any run.
        with pytest.raises(DomainError):
            run_candidate(make_candidate("   \n"), ORACLE_LINES, None)

    def test_empty_suite_is_rejected(self, sandbox):
        with pytest.raises(DomainError):
            run_candidate(make_candidate(PALINDROME_PROGRAM), [], sandbox)


class TestCoverageOfSuite:
    def test_oracle_suite_leaves_branches_uncovered(self, sandbox):
        pct = coverage_of_suite(PALINDROME_PROGRAM, ORACLE_LINES, sandbox)
        assert pct == pytest.approx(1200 / 14)

    def test_expanded_suite_covers_more(self, sandbox):
        oracle = coverage_of_suite(PALINDROME_PROGRAM, ORACLE_LINES, sandbox)
        expanded = coverage_of_suite(PALINDROME_PROGRAM, GENERATED_LINES, sandbox)
        assert expanded == pytest.approx(100.0)
        assert expanded > oracle

    def test_branchless_program_is_fully_covered(self, sandbox):
        pct = coverage_of_suite(
            "def c():\n    return 1\n", ["assert c() == 1"], sandbox
        )
        assert pct == 100.0

    def test_failing_tests_still_exercise_branches(self, sandbox):
        guarded = (
            "def sign(x):\n"
            "    if x >= 0:\n"
            "        return 1\n"
            "    return -1\n"
        )
        pct = coverage_of_suite(
            guarded, ["assert sign(1) == 2", "assert sign(-1) == 0"], sandbox
        )
        assert pct == 100.0

    def test_rejects_empty_suite(self, sandbox):
        with pytest.raises(DomainError):
            coverage_of_suite(PALINDROME_PROGRAM, [], sandbox)


def make_variant(status):
    return model.TestVariant(
        origin_index=0,
        mr=MR5,
        case=parse_test_case("assert f(1) == 1"),
        expected_state=model.ExpectedState.AS_TRANSFORMED,
        status=status,
        source=model.VariantSource.RULE_BASED,
    )


class TestCorrectnessRate:
    def test_simple_ratio(self):
        variants = [make_variant(model.TestStatus.VALID)] * 3
        variants.append(make_variant(model.TestStatus.INVALID))
        assert correctness_rate(variants) == pytest.approx(75.0)

    def test_duplicates_are_excluded(self):
        variants = [
            make_variant(model.TestStatus.VALID),
            make_variant(model.TestStatus.DUPLICATE),
        ]
        assert correctness_rate(variants) == 100.0

    def test_pending_variants_are_excluded(self):
        variants = [
            make_variant(model.TestStatus.VALID),
            make_variant(model.TestStatus.VALID),
            make_variant(model.TestStatus.INVALID),
            make_variant(model.TestStatus.INVALID),
            make_variant(model.TestStatus.DUPLICATE),
            make_variant(model.TestStatus.PENDING),
        ]
        assert correctness_rate(variants) == pytest.approx(50.0)

    def test_all_invalid_is_zero(self):
        variants = [make_variant(model.TestStatus.INVALID)] * 2
        assert correctness_rate(variants) == 0.0

    def test_rejects_when_nothing_was_judged(self):
        with pytest.raises(DomainError):
            correctness_rate([])
        with pytest.raises(DomainError):
            correctness_rate([make_variant(model.TestStatus.DUPLICATE)])
        with pytest.raises(DomainError):
            correctness_rate([make_variant(model.TestStatus.PENDING)])


class TestConsistency:
    def test_divergent_interpretations_disagree_beyond_ten(self, sandbox):
        candidates = [
            make_candidate(OCTAGONAL_ORG_PROGRAM, task_id="oct"),
            make_candidate(OCTAGONAL_CMA_PROGRAM, task_id="oct", sample_index=1),
        ]
        outcomes = cross_variant_consistency(
            candidates,
            [([11],), ([5],)],
            sandbox,
            entry_point="sum_of_octagonal_numbers",
        )
        assert [o.expression for o in outcomes] == [
            "sum_of_octagonal_numbers([11])",
            "sum_of_octagonal_numbers([5])",
        ]
        beyond, within = outcomes
        assert beyond.statuses == ("pass", "pass")
        assert beyond.values == (1386, 1045)
        assert not beyond.consistent
        assert within.values == (1045, 1045)
        assert within.consistent

    def test_crashing_candidate_breaks_consistency(self, sandbox):
        boom = (
            "def sum_of_octagonal_numbers(lst):\n"
            "    raise ValueError('boom')\n"
        )
        outcomes = cross_variant_consistency(
            [
                make_candidate(OCTAGONAL_ORG_PROGRAM, task_id="oct"),
                make_candidate(boom, task_id="oct", sample_index=1),
            ],
            [([5],)],
            sandbox,
            entry_point="sum_of_octagonal_numbers",
        )
        assert outcomes[0].statuses == ("pass", "error")
        assert not outcomes[0].consistent

    def test_empty_source_candidate_probes_as_error(self, sandbox):
        outcomes = cross_variant_consistency(
            [
                make_candidate(OCTAGONAL_ORG_PROGRAM, task_id="oct"),
                make_candidate("", task_id="oct", sample_index=1),
            ],
            [([5],)],
            sandbox,
            entry_point="sum_of_octagonal_numbers",
        )
        assert outcomes[0].statuses == ("pass", "error")
        assert not outcomes[0].consistent

    def test_needs_at_least_two_candidates(self, sandbox):
        with pytest.raises(DomainError):
            cross_variant_consistency(
                [make_candidate(OCTAGONAL_ORG_PROGRAM, task_id="oct")],
                [([5],)],
                sandbox,
                entry_point="sum_of_octagonal_numbers",
            )

    def test_no_probes_no_outcomes(self, sandbox):
        outcomes = cross_variant_consistency(
            [
                make_candidate(OCTAGONAL_ORG_PROGRAM, task_id="oct"),
                make_candidate(OCTAGONAL_CMA_PROGRAM, task_id="oct", sample_index=1),
            ],
            [],
            sandbox,
            entry_point="sum_of_octagonal_numbers",
        )
        assert outcomes == []


ADD1_OK = "def add1(x):\n    return x + 1\n"
DBL_OK = "def dbl(x):\n    return x * 2\n"
DBL_BAD = "def dbl(x):\n    return x * 3\n"

STEPS_T1 = "1. Read the input number\n2. Increase it by one\n3. Return the increased value"
PARA_T1 = "Given a number, produce the value one greater than it."
STEPS_T2 = "1. Read the input number\n2. Multiply it by two\n3. Return the product"
PARA_T2 = "Given a number, produce its double."

# Variant markers are checked before base markers so a retry prompt that
# quotes both the rewrite and the original still routes to the rewrite.
CODE_ROUTES = [
    ("Increase it by one", ADD1_OK),
    ("one greater", ADD1_OK),
    ("Multiply it by two", DBL_OK),
    ("produce its double", DBL_BAD),
    ("Add one to the given number", ADD1_OK),
    ("Return twice the given number", DBL_BAD),
]


class RoutedLLM:
    """Deterministic provider that answers by inspecting the prompt."""

    def __init__(self):
        self.mutate_calls = 0
        self.solve_calls = 0

    def complete(self, req):
        system = req.messages[0].content
        user = req.messages[-1].content
        if system.startswith("You rewrite"):
            self.mutate_calls += 1
            text = self._mutate(user)
        else:
            self.solve_calls += 1
            text = self._solve(user)
        return ChatResult(text=text, usage=None, digest=request_digest(req))

    def _mutate(self, user):
        if "numbered list of explicit steps" in user:
            table = {"Add one": STEPS_T1, "twice": STEPS_T2}
        elif "Paraphrase the problem statement" in user:
            table = {"Add one": PARA_T1, "twice": PARA_T2}
        else:
            raise AssertionError(f"unexpected mutation prompt: {user!r}")
        for marker, text in table.items():
            if marker in user:
                return text
        raise AssertionError(f"no task marker in prompt: {user!r}")

    def _solve(self, user):
        for marker, code in CODE_ROUTES:
            if marker in user:
                return f"```python\n{code}```"
        raise AssertionError(f"no code route for prompt: {user!r}")


def ablation_tasks():
    return [
        Task(
            id="t1",
            description="Add one to the given number and return it.",
            entry_point="add1",
            oracle_solution=ADD1_OK,
            oracle_tests=("assert add1(1) == 2", "assert add1(5) == 6"),
        ),
        Task(
            id="t2",
            description="Return twice the given number.",
            entry_point="dbl",
            oracle_solution=DBL_OK,
            oracle_tests=("assert dbl(2) == 4", "assert dbl(3) == 6"),
        ),
    ]


class TestAblate:
    def test_points_cover_base_each_mr_and_full_pool(self, sandbox):
        llm = RoutedLLM()
        points = ablate(
            ablation_tasks(),
            [MR3, MR4],
            llm,
            sandbox,
            scorer=lambda a, b: 1.0,
            n=5,
            seed=7,
        )
        assert [p.label for p in points] == ["Base", "MR3", "MR4", "CMA"]
        assert all(p.task_count == 2 for p in points)
        by_label = {p.label: p for p in points}

        # t1 pools all pass; t2 passes only under the MR3 rewrite.
        assert by_label["Base"].pass_at_1 == pytest.approx(0.5)
        assert by_label["Base"].pass_at_5 == pytest.approx(0.5)
        assert by_label["MR3"].pass_at_1 == pytest.approx(1.0)
        assert by_label["MR3"].pass_at_5 == pytest.approx(1.0)
        assert by_label["MR4"].pass_at_1 == pytest.approx(0.5)
        assert by_label["MR4"].pass_at_5 == pytest.approx(0.5)
        assert by_label["CMA"].pass_at_1 == pytest.approx(2 / 3)
        want_p5 = (1.0 + brute_pass_at_k(15, 5, 5)) / 2
        assert by_label["CMA"].pass_at_5 == pytest.approx(want_p5, abs=1e-12)

    def test_generates_one_pool_per_task(self, sandbox):
        llm = RoutedLLM()
        ablate(
            ablation_tasks(),
            [MR3, MR4],
            llm,
            sandbox,
            scorer=lambda a, b: 1.0,
            n=5,
        )
        # 2 tasks x (base + 2 accepted rewrites) x 5 samples, generated
        # once and subset per point.
        assert llm.solve_calls == 30
        assert llm.mutate_calls == 4

    def test_exhausted_rewrites_drop_out_of_their_point_and_the_pool(self, sandbox):
        def reject_paraphrases(original, candidate):
            if candidate in (PARA_T1, PARA_T2):
                return 0.1
            return 1.0

        llm = RoutedLLM()
        points = ablate(
            ablation_tasks(),
            [MR3, MR4],
            llm,
            sandbox,
            scorer=reject_paraphrases,
            n=5,
        )
        by_label = {p.label: p for p in points}
        # The review loop retries the paraphrase three times per task.
        assert llm.mutate_calls == 2 + 2 * 3
        assert by_label["MR4"].pass_at_1 == 0.0
        assert by_label["MR4"].pass_at_5 == 0.0
        assert by_label["CMA"].pass_at_1 == pytest.approx(0.75)
        want_p5 = (1.0 + brute_pass_at_k(10, 5, 5)) / 2
        assert by_label["CMA"].pass_at_5 == pytest.approx(want_p5, abs=1e-12)

    def test_rejects_empty_task_list(self, sandbox):
        with pytest.raises(DomainError):
            ablate([], [MR3], RoutedLLM(), sandbox, scorer=lambda a, b: 1.0)

    def test_point_metrics_are_probabilities(self, sandbox):
        points = ablate(
            ablation_tasks(),
            [MR3],
            RoutedLLM(),
            sandbox,
            scorer=lambda a, b: 1.0,
            n=5,
        )
        for point in points:
            assert 0.0 <= point.pass_at_1 <= point.pass_at_5 <= 1.0
