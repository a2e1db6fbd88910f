"""End-to-end pipeline commands behind the CLI.

Each command loads tasks, runs its stages through a bounded worker pool,
and writes exactly one run ledger under the output directory.  Workers
buffer their records and the main thread flushes buffers in task order,
so ledgers are deterministic at any parallelism level.

LLM usage is tagged by pipeline stage: "mutator" for description and
test-line rewrites, "generator" for code generation from rewritten
descriptions, and "base" for generation from the original description.
"""

from __future__ import annotations

import pathlib
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from .benchio import (
    DatasetFile,
    Ledger,
    ReportLayout,
    derive_run_id,
    emit_report,
    load_tasks,
    read_ledger,
)
from .config import RunConfig
from .errors import ConfigError, MissingMetric, SandboxError
from .evaluate import ablate, average_pass_rate, run_candidate
from .gateway import (
    HTTPProvider,
    RecordingProvider,
    ReplayProvider,
    estimate_usage,
)
from .generate import PromptMode, build_prompt, candidate_prompt_request, extract_test_lines, generate_candidates
from .model import (
    MRTarget,
    Origin,
    RunMetrics,
    TestStatus,
    VariantStatus,
    payload_of,
)
from .mutate import expand_suite
from .review import (
    HashingEmbedder,
    ReviewConfig,
    gate_with_llm,
    make_scorer,
    validate_test_variant,
)
from .sandbox import SandboxClient
from .testcases import render_test_case


class UsageTap:
    """Provider wrapper that buffers one llm_usage record per request.

    With ``module`` set to None the stage is inferred from the system
    prompt, which ablation relies on because it interleaves stages.
    """

    def __init__(self, inner, sink: list, task_id: str = ""):
        self.inner = inner
        self.sink = sink
        self.task_id = task_id
        self.module: Optional[str] = "base"

    def _module_for(self, req) -> str:
        if self.module is not None:
            return self.module
        system = req.messages[0].content if req.messages else ""
        return "mutator" if system.startswith("You rewrite") else "generator"

    def complete(self, req):
        result = self.inner.complete(req)
        usage = result.usage or estimate_usage(req, result.text)
        self.sink.append(
            (
                "llm_usage",
                {
                    "module": self._module_for(req),
                    "task_id": self.task_id,
                    "prompt_tokens": usage.prompt_tokens,
                    "completion_tokens": usage.completion_tokens,
                    "estimated": usage.estimated,
                },
            )
        )
        return result


def build_provider(config: RunConfig):
    if config.replay_dir:
        return ReplayProvider(config.replay_dir)
    live = HTTPProvider(
        config.provider, config.endpoint, api_key_env=config.api_key_env
    )
    if config.record_dir:
        return RecordingProvider(live, config.record_dir)
    return live


class _SandboxPool:
    """One sandbox client per worker thread; the stdio protocol is serial."""

    def __init__(self, command=None):
        self._command = list(command) if command else None
        self._local = threading.local()
        self._clients = []
        self._lock = threading.Lock()

    def get(self) -> SandboxClient:
        client = getattr(self._local, "client", None)
        if client is None:
            client = SandboxClient(command=self._command)
            self._local.client = client
            with self._lock:
                self._clients.append(client)
        return client

    def close(self):
        for client in self._clients:
            client.close()


def _map_tasks(tasks, worker, parallelism: int) -> list:
    if parallelism <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(worker, tasks))


def _load(config: RunConfig) -> list:
    tasks = load_tasks(
        DatasetFile(config.dataset, dict(config.field_map), config.dataset_label)
    )
    if not tasks:
        raise ConfigError(f"dataset {config.dataset} holds no tasks")
    return tasks


def _open_ledger(config: RunConfig, command: str) -> Ledger:
    out = pathlib.Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "ledger.jsonl"
    if path.exists():
        path.unlink()
    return Ledger(path, derive_run_id(command, config.seed))


def _flush(ledger: Ledger, buffers) -> None:
    for buffer in buffers:
        for kind, payload in buffer:
            ledger.append(kind, payload)


def _description_mrs(config: RunConfig):
    return [mr for mr in config.mr_kinds() if mr.target is MRTarget.DESCRIPTION]


def _test_mrs(config: RunConfig):
    return [mr for mr in config.mr_kinds() if mr.target is MRTarget.TEST_CASE]


def _usage_totals(buffers, modules) -> tuple[int, int]:
    tokens_in = 0
    tokens_out = 0
    for buffer in buffers:
        for kind, payload in buffer:
            if kind == "llm_usage" and payload["module"] in modules:
                tokens_in += payload["prompt_tokens"]
                tokens_out += payload["completion_tokens"]
    return tokens_in, tokens_out


def run_mutate(config: RunConfig, provider=None) -> pathlib.Path:
    """Rewrite every task description under each requested MR and gate it."""
    tasks = _load(config)
    provider = provider if provider is not None else build_provider(config)
    review_cfg = ReviewConfig(config.similarity_threshold, config.max_iterations)
    scorer = make_scorer(HashingEmbedder())
    mrs = _description_mrs(config)

    def worker(task):
        buffer: list = []
        tap = UsageTap(provider, buffer, task_id=task.id)
        tap.module = "mutator"
        for mr in mrs:
            variant = gate_with_llm(
                task,
                mr,
                tap,
                review_cfg,
                scorer,
                language=config.language,
                model=config.model,
                seed=config.seed,
            )
            buffer.append(payload_of(variant))
        return buffer

    buffers = _map_tasks(tasks, worker, config.parallelism)
    ledger = _open_ledger(config, "mutate")
    _flush(ledger, buffers)
    accepted = sum(
        1
        for buffer in buffers
        for kind, payload in buffer
        if kind == "description_variant" and payload["status"] == "accepted"
    )
    print(
        f"mutate: {len(tasks)} tasks, {len(mrs)} MRs, "
        f"{accepted} rewrites accepted -> {ledger.path}"
    )
    return ledger.path


def run_gen(config: RunConfig, provider=None) -> pathlib.Path:
    """Generate and evaluate Base and CMA candidate pools for every task."""
    tasks = _load(config)
    provider = provider if provider is not None else build_provider(config)
    review_cfg = ReviewConfig(config.similarity_threshold, config.max_iterations)
    scorer = make_scorer(HashingEmbedder())
    mrs = _description_mrs(config)
    pool = _SandboxPool(config.sandbox_command)

    def worker(task):
        buffer: list = []
        tap = UsageTap(provider, buffer, task_id=task.id)
        tap.module = "mutator"
        rewrites = []
        for mr in mrs:
            variant = gate_with_llm(
                task,
                mr,
                tap,
                review_cfg,
                scorer,
                language=config.language,
                model=config.model,
                seed=config.seed,
            )
            buffer.append(payload_of(variant))
            if variant.status is VariantStatus.ACCEPTED:
                rewrites.append((Origin.single(mr), variant.text))
        tap.module = "base"
        candidates = generate_candidates(
            task,
            [(Origin.base(), task.description)],
            tap,
            config.samples,
            model=config.model,
            seed=config.seed,
        )
        if rewrites:
            tap.module = "generator"
            candidates += generate_candidates(
                task,
                rewrites,
                tap,
                config.samples,
                model=config.model,
                seed=config.seed,
            )
        sandbox = pool.get()
        verdicts: dict[str, bool] = {}
        base_counts = [0, 0]
        cma_counts = [0, 0]
        for candidate in candidates:
            buffer.append(payload_of(candidate))
            source = candidate.source_code
            if not source.strip():
                passed = False
            elif source in verdicts:
                passed = verdicts[source]
            else:
                report = run_candidate(
                    candidate, task.oracle_tests, sandbox, timeout_s=config.timeout_s
                )
                passed = report.passed
                verdicts[source] = passed
            buffer.append(
                (
                    "execution",
                    {
                        "task_id": task.id,
                        "origin": candidate.origin.label,
                        "sample_index": candidate.sample_index,
                        "passed": passed,
                    },
                )
            )
            cma_counts[0] += 1
            cma_counts[1] += int(passed)
            if candidate.origin.kind == "base":
                base_counts[0] += 1
                base_counts[1] += int(passed)
        return buffer, tuple(base_counts), tuple(cma_counts)

    try:
        results = _map_tasks(tasks, worker, config.parallelism)
    finally:
        pool.close()
    buffers = [r[0] for r in results]
    base_counts = [r[1] for r in results]
    cma_counts = [r[2] for r in results]
    ledger = _open_ledger(config, "gen")
    _flush(ledger, buffers)
    series = {}
    for name, counts, modules in (
        ("base", base_counts, ("base",)),
        ("cma", cma_counts, ("mutator", "generator", "base")),
    ):
        tokens_in, tokens_out = _usage_totals(buffers, modules)
        metrics = RunMetrics(
            pass_at_1=average_pass_rate(counts, 1),
            pass_at_5=average_pass_rate(counts, 5),
            branch_coverage_pct=0.0,
            correctness_rate_pct=0.0,
            tokens_in=tokens_in,
            tokens_out=tokens_out,
        )
        kind, payload = payload_of(metrics)
        ledger.append(kind, {"series": name, **payload})
        series[name] = metrics
    print(
        f"gen: {len(tasks)} tasks, pass@1 base "
        f"{series['base'].pass_at_1 * 100:.6g} -> cma "
        f"{series['cma'].pass_at_1 * 100:.6g} -> {ledger.path}"
    )
    return ledger.path


def run_testgen(config: RunConfig, provider=None) -> pathlib.Path:
    """Expand each task's oracle suite with test-case MRs and validate it."""
    tasks = _load(config)
    provider = provider if provider is not None else build_provider(config)
    mrs = _test_mrs(config)
    pool = _SandboxPool(config.sandbox_command)

    def worker(task):
        buffer: list = []
        tap = UsageTap(provider, buffer, task_id=task.id)
        tap.module = "mutator"
        variants = expand_suite(
            task, mrs, llm=tap, unparseable="llm", model=config.model, seed=config.seed
        )
        sandbox = pool.get()
        checked = [
            validate_test_variant(
                variant, task.oracle_solution, sandbox, timeout_s=config.timeout_s
            )
            for variant in variants
        ]
        for variant in checked:
            kind, payload = payload_of(variant)
            buffer.append((kind, {"series": "cma", **payload}))
        _, oracle_cov = sandbox.run(
            task.oracle_solution,
            list(task.oracle_tests),
            timeout_s=config.timeout_s,
            measure_coverage=True,
        )
        if oracle_cov is None:
            raise SandboxError(f"runner returned no coverage for task {task.id!r}")
        buffer.append(
            (
                "coverage",
                {
                    "series": "base",
                    "task_id": task.id,
                    "branch_covered": oracle_cov.branch_covered,
                    "branch_total": oracle_cov.branch_total,
                    "branch_pct": oracle_cov.branch_pct,
                },
            )
        )
        valid_lines = [
            render_test_case(variant.case)
            for variant in checked
            if variant.status is TestStatus.VALID
        ]
        if valid_lines:
            _, cma_cov = sandbox.run(
                task.oracle_solution,
                valid_lines,
                timeout_s=config.timeout_s,
                measure_coverage=True,
            )
            if cma_cov is None:
                raise SandboxError(
                    f"runner returned no coverage for task {task.id!r}"
                )
            buffer.append(
                (
                    "coverage",
                    {
                        "series": "cma",
                        "task_id": task.id,
                        "branch_covered": cma_cov.branch_covered,
                        "branch_total": cma_cov.branch_total,
                        "branch_pct": cma_cov.branch_pct,
                    },
                )
            )
        if config.baseline:
            tap.module = "base"
            spec = build_prompt(task, task.description, PromptMode.TEST_GEN)
            result = tap.complete(
                candidate_prompt_request(spec, config.model, config.seed)
            )
            lines = extract_test_lines(result.text)
            if lines:
                results, _ = sandbox.run(
                    task.oracle_solution, lines, timeout_s=config.timeout_s
                )
                for line, outcome in zip(lines, results):
                    buffer.append(
                        (
                            "test_variant",
                            {
                                "series": "base",
                                "origin_index": -1,
                                "mr": None,
                                "line": line,
                                "status": "valid"
                                if outcome.status == "pass"
                                else "invalid",
                                "reason": outcome.message or None,
                            },
                        )
                    )
        return buffer

    try:
        buffers = _map_tasks(tasks, worker, config.parallelism)
    finally:
        pool.close()
    ledger = _open_ledger(config, "testgen")
    _flush(ledger, buffers)
    totals = {"valid": 0, "invalid": 0, "duplicate": 0}
    for buffer in buffers:
        for kind, payload in buffer:
            if kind == "test_variant" and payload.get("series") == "cma":
                totals[payload["status"]] = totals.get(payload["status"], 0) + 1
    print(
        f"testgen: {len(tasks)} tasks, {totals['valid']} valid / "
        f"{totals['invalid']} invalid variants -> {ledger.path}"
    )
    return ledger.path


def run_ablate(config: RunConfig, provider=None) -> pathlib.Path:
    """Score Base, each description MR alone, and the full pool per task."""
    tasks = _load(config)
    provider = provider if provider is not None else build_provider(config)
    review_cfg = ReviewConfig(config.similarity_threshold, config.max_iterations)
    scorer = make_scorer(HashingEmbedder())
    mrs = _description_mrs(config)
    pool = _SandboxPool(config.sandbox_command)

    def worker(task):
        buffer: list = []
        tap = UsageTap(provider, buffer, task_id=task.id)
        tap.module = None
        points = ablate(
            [task],
            mrs,
            tap,
            pool.get(),
            review_cfg=review_cfg,
            scorer=scorer,
            n=config.samples,
            model=config.model,
            seed=config.seed,
            timeout_s=config.timeout_s,
            language=config.language,
        )
        return buffer, points

    try:
        results = _map_tasks(tasks, worker, config.parallelism)
    finally:
        pool.close()
    ledger = _open_ledger(config, "ablate")
    _flush(ledger, [r[0] for r in results])
    labels = [point.label for point in results[0][1]]
    for index, label in enumerate(labels):
        rows = [result[1][index] for result in results]
        ledger.append(
            "ablation_point",
            {
                "label": label,
                "pass_at_1": sum(p.pass_at_1 for p in rows) / len(rows),
                "pass_at_5": sum(p.pass_at_5 for p in rows) / len(rows),
                "task_count": sum(p.task_count for p in rows),
            },
        )
    print(
        f"ablate: {len(tasks)} tasks, points {', '.join(labels)} -> {ledger.path}"
    )
    return ledger.path


def run_report(config: RunConfig) -> list:
    """Render every table the ledger can support, to stdout and files."""
    path = pathlib.Path(config.out) / "ledger.jsonl"
    if not path.exists():
        raise ConfigError(f"no ledger at {path}; run a pipeline command first")
    records = read_ledger(path)
    written = []
    for layout in ReportLayout:
        try:
            report = emit_report(records, layout)
        except MissingMetric:
            continue
        text_path = path.parent / f"report_{layout.value}.txt"
        csv_path = path.parent / f"report_{layout.value}.csv"
        text_path.write_text(report.text + "\n", encoding="utf-8")
        csv_path.write_text(report.csv, encoding="utf-8")
        print(f"== {layout.value} ==")
        print(report.text)
        written.append(text_path)
        written.append(csv_path)
    if not written:
        raise MissingMetric("ledger holds no reportable metrics")
    return written
