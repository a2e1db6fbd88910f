#!/usr/bin/env python3
"""Rebuild the committed fixtures under fixtures/.

The replay store is recorded by running the real gen pipeline against a
scripted stand-in provider, so every digest in the store is one the
pipeline will ask for again.  After recording, the script replays the
store through gen and ablate, checks the frozen pass-table row and the
ablation points, and fails loudly on any drift.  Run it from anywhere;
paths resolve relative to the repository root.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from metamorph.benchio import Ledger, ReportLayout, emit_report, read_ledger
from metamorph.config import RunConfig
from metamorph.gateway import (
    ChatResult,
    RecordingProvider,
    Usage,
    request_digest,
    usage_summary,
)
from metamorph.pipeline import run_ablate, run_gen, run_testgen
from metamorph.review import HashingEmbedder, make_scorer

FIXTURES = ROOT / "fixtures"
BASE_SEED = 7
SAMPLES = 5

TASKS = [
    {
        "id": "sum-pair",
        "description": (
            "Given two integers a and b, return the sum of a and b as a "
            "single integer value."
        ),
        "entry_point": "add_pair",
        "solution": "def add_pair(a, b):\n    return a + b\n",
        "wrong": "def add_pair(a, b):\n    return a - b\n",
        "tests": ["assert add_pair(2, 3) == 5", "assert add_pair(-4, 4) == 0"],
    },
    {
        "id": "scale-triple",
        "description": (
            "Given an integer n, return three times the value of n as a "
            "single integer result."
        ),
        "entry_point": "scale_triple",
        "solution": "def scale_triple(n):\n    return n * 3\n",
        "wrong": "def scale_triple(n):\n    return n * 2\n",
        "tests": ["assert scale_triple(2) == 6", "assert scale_triple(-3) == -9"],
    },
    {
        "id": "count-evens",
        "description": (
            "Given a list of integers, return the count of even integers "
            "contained in the given list."
        ),
        "entry_point": "count_evens",
        "solution": (
            "def count_evens(values):\n"
            "    return sum(1 for v in values if v % 2 == 0)\n"
        ),
        "wrong": "def count_evens(values):\n    return len(values)\n",
        "tests": [
            "assert count_evens([1, 2, 3, 4]) == 2",
            "assert count_evens([5, 7]) == 0",
        ],
    },
    {
        "id": "join-words",
        "description": (
            "Given a list of words, return the words joined into one string "
            "separated by single spaces."
        ),
        "entry_point": "join_words",
        "solution": "def join_words(words):\n    return ' '.join(words)\n",
        "wrong": "def join_words(words):\n    return ''.join(words)\n",
        "tests": [
            "assert join_words(['a', 'b']) == 'a b'",
            "assert join_words(['hi']) == 'hi'",
        ],
    },
    {
        "id": "max-abs",
        "description": (
            "Given a list of integers, return the largest absolute value "
            "found among the integers in the list."
        ),
        "entry_point": "max_abs",
        "solution": "def max_abs(values):\n    return max(abs(v) for v in values)\n",
        "wrong": "def max_abs(values):\n    return max(values)\n",
        "tests": ["assert max_abs([-7, 3]) == 7", "assert max_abs([1, -1, 5]) == 5"],
    },
]

# Accepted rewrites must clear the 0.8 similarity gate on attempt one;
# check_scores() verifies that with margin before anything is recorded.
REWRITES = {
    ("sum-pair", "MR1"): (
        "Given two integers a and b, return the sum of a and b as a single "
        "integer value, not the difference of a and b."
    ),
    ("sum-pair", "MR2"): (
        "Etant donne two integers a and b, retourne the sum of a and b as a "
        "single integer value."
    ),
    ("sum-pair", "MR3"): (
        "1. Read two integers a and b. 2. Compute the sum of a and b. "
        "3. Return the sum of a and b as a single integer value."
    ),
    ("sum-pair", "MR4"): (
        "Given two integers a and b, produce the total of a and b as a "
        "single integer value."
    ),
    ("scale-triple", "MR1"): (
        "Given an integer n, return three times the value of n as a single "
        "integer result, not two times the value of n."
    ),
    ("scale-triple", "MR2"): (
        "Etant donne an integer n, retourne three times the value of n as a "
        "single integer result."
    ),
    ("scale-triple", "MR3"): (
        "1. Read an integer n. 2. Compute three times the value of n. "
        "3. Return three times the value of n as a single integer result."
    ),
    ("scale-triple", "MR4"): (
        "Given an integer n, produce triple the value of n as a single "
        "integer result."
    ),
    ("count-evens", "MR1"): (
        "Given a list of integers, return the count of even integers "
        "contained in the given list, not the count of odd integers."
    ),
    ("count-evens", "MR2"): (
        "Etant donne a list of integers, retourne the count of even "
        "integers contained in the given list."
    ),
    ("count-evens", "MR3"): (
        "1. Read a list of integers. 2. Count the even integers contained "
        "in the given list. 3. Return the count of even integers."
    ),
    ("count-evens", "MR4"): (
        "Given a list of integers, produce the number of even integers "
        "contained in the given list."
    ),
    ("join-words", "MR1"): (
        "Given a list of words, return the words joined into one string "
        "separated by single spaces, not joined without spaces."
    ),
    ("join-words", "MR2"): (
        "Etant donne a list of words, retourne the words joined into one "
        "string separated by single spaces."
    ),
    ("join-words", "MR3"): (
        "1. Read a list of words. 2. Join the words into one string "
        "separated by single spaces. 3. Return the joined string of words."
    ),
    ("join-words", "MR4"): (
        "Given a list of words, produce the words joined into one string "
        "separated by single spaces."
    ),
    ("max-abs", "MR2"): (
        "Etant donne a list of integers, retourne the largest absolute "
        "value found among the integers in the list."
    ),
    ("max-abs", "MR3"): (
        "1. Read a list of integers. 2. Find the largest absolute value "
        "found among the integers. 3. Return the largest absolute value in "
        "the list."
    ),
    ("max-abs", "MR4"): (
        "Given a list of integers, produce the greatest absolute value "
        "found among the integers in the list."
    ),
}

# Three full-French rewrites for max-abs under MR1, each scoring below
# the gate, so that task exhausts its retry budget.
REJECTS = [
    (
        "Etant donne deux listes d'entiers, renvoyer la plus grande valeur "
        "absolue trouvee parmi les entiers de la liste."
    ),
    (
        "Pour une liste d'entiers, calculer puis renvoyer la valeur absolue "
        "maximale presente dans cette liste d'entiers."
    ),
    (
        "Renvoyer la plus grande valeur absolue parmi tous les entiers "
        "contenus dans la liste fournie en entree."
    ),
]

# How many of the five samples per description solve the task.  Base
# pools land on pass@1 = 0.60 and the full pools on 0.69.
CORRECT = {
    ("sum-pair", "base"): 3,
    ("sum-pair", "MR1"): 4,
    ("sum-pair", "MR2"): 4,
    ("sum-pair", "MR3"): 3,
    ("sum-pair", "MR4"): 3,
    ("scale-triple", "base"): 3,
    ("scale-triple", "MR1"): 4,
    ("scale-triple", "MR2"): 4,
    ("scale-triple", "MR3"): 4,
    ("scale-triple", "MR4"): 3,
    ("count-evens", "base"): 3,
    ("count-evens", "MR1"): 4,
    ("count-evens", "MR2"): 4,
    ("count-evens", "MR3"): 3,
    ("count-evens", "MR4"): 3,
    ("join-words", "base"): 3,
    ("join-words", "MR1"): 4,
    ("join-words", "MR2"): 4,
    ("join-words", "MR3"): 4,
    ("join-words", "MR4"): 3,
    ("max-abs", "base"): 3,
    ("max-abs", "MR2"): 4,
    ("max-abs", "MR3"): 3,
    ("max-abs", "MR4"): 3,
}

EXPECTED_ABLATION = {
    "Base": 0.60,
    "MR1": 0.64,
    "MR2": 0.80,
    "MR3": 0.68,
    "MR4": 0.60,
    "CMA": 0.69,
}

USAGE_ROWS = [
    ("mutator", "demo-1", 200, 280),
    ("mutator", "demo-2", 210, 294),
    ("generator", "demo-1", 250, 320),
    ("generator", "demo-2", 266, 336),
    ("base", "demo-1", 100, 90),
    ("base", "demo-2", 112, 92),
]

_MR_MARKERS = [
    ("negated form", "MR1"),
    ("Translate the problem statement", "MR2"),
    ("numbered list of explicit steps", "MR3"),
    ("Paraphrase the problem statement", "MR4"),
]

_WRAPPERS = [
    "```python\n{code}```",
    "Here is a straightforward implementation.\n\n```python\n{code}```",
    "```python\n{code}```\n\nThis covers the listed cases.",
]


class ScriptedRouter:
    """Deterministic provider keyed on prompt content and request seed."""

    def __init__(self):
        routes = [(t["description"], t["id"], "base") for t in TASKS]
        routes += [(text, tid, code) for (tid, code), text in REWRITES.items()]
        # longest needle first, since MR1 rewrites embed most of the original
        self._routes = sorted(routes, key=lambda r: len(r[0]), reverse=True)
        self._tasks = {t["id"]: t for t in TASKS}

    def complete(self, req):
        system = req.messages[0].content
        user = req.messages[-1].content
        if system.startswith("You rewrite"):
            text = self._mutate(user)
        else:
            text = self._solve(user, req.seed)
        usage = Usage(
            prompt_tokens=sum(len(m.content) for m in req.messages) // 4,
            completion_tokens=max(1, len(text) // 4),
            estimated=False,
        )
        return ChatResult(text=text, usage=usage, digest=request_digest(req))

    def _mutate(self, user):
        tid = next(t["id"] for t in TASKS if t["description"] in user)
        code = next(code for marker, code in _MR_MARKERS if marker in user)
        if (tid, code) in REWRITES:
            return REWRITES[(tid, code)]
        if (tid, code) == ("max-abs", "MR1"):
            # retry prompts quote the previous rewrite verbatim
            if REJECTS[1] in user:
                return REJECTS[2]
            if REJECTS[0] in user:
                return REJECTS[1]
            return REJECTS[0]
        raise AssertionError(f"unplanned mutation request for {tid}/{code}")

    def _solve(self, user, seed):
        if seed is None:
            raise AssertionError("generation request arrived unseeded")
        sample = seed - BASE_SEED
        tid, origin = next(
            (tid, origin) for text, tid, origin in self._routes if text in user
        )
        task = self._tasks[tid]
        correct = sample < CORRECT[(tid, origin)]
        code = task["solution"] if correct else task["wrong"]
        return _WRAPPERS[sample % len(_WRAPPERS)].format(code=code)


def gen_config(out, replay=None):
    return RunConfig(
        dataset=str(FIXTURES / "gen_dataset.jsonl"),
        out=str(out),
        mrs=("MR1", "MR2", "MR3", "MR4"),
        samples=SAMPLES,
        seed=BASE_SEED,
        replay_dir=None if replay is None else str(replay),
    )


def write_gen_dataset():
    records = [
        {
            "task_id": t["id"],
            "prompt": t["description"],
            "entry_point": t["entry_point"],
            "canonical_solution": t["solution"],
            "test": "\n".join(t["tests"]),
        }
        for t in TASKS
    ]
    path = FIXTURES / "gen_dataset.jsonl"
    path.write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8"
    )
    return path


def check_scores():
    score = make_scorer(HashingEmbedder())
    originals = {t["id"]: t["description"] for t in TASKS}
    for (tid, code), text in REWRITES.items():
        s = score(originals[tid], text)
        assert s >= 0.81, f"{tid}/{code} scores {s:.4f}, too close to the gate"
    for index, text in enumerate(REJECTS):
        s = score(originals["max-abs"], text)
        assert s <= 0.79, f"reject {index} scores {s:.4f}, would pass the gate"


def record_store():
    store = FIXTURES / "replay_gen"
    if store.exists():
        shutil.rmtree(store)
    with tempfile.TemporaryDirectory() as tmp:
        cfg = gen_config(pathlib.Path(tmp) / "out")
        run_gen(cfg, provider=RecordingProvider(ScriptedRouter(), store))
    return store


def verify_gen_replay(store):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        first = run_gen(gen_config(tmp / "a", replay=store)).read_bytes()
        second = run_gen(gen_config(tmp / "b", replay=store)).read_bytes()
        assert first == second, "seeded replay runs differ"

        ledger_path = tmp / "a" / "ledger.jsonl"
        ledger_path.write_bytes(first)
        report = emit_report(read_ledger(ledger_path), ReportLayout.PASS_TABLE)
        rows = report.text.splitlines()
        assert rows[1] == "Pass@1 & 60 & 69 & +9", f"unexpected row: {rows[1]!r}"


def verify_ablate_replay(store):
    with tempfile.TemporaryDirectory() as tmp:
        cfg = gen_config(pathlib.Path(tmp) / "out", replay=store)
        ledger = run_ablate(cfg)
        points = {
            r.payload["label"]: r.payload["pass_at_1"]
            for r in read_ledger(ledger)
            if r.kind == "ablation_point"
        }
    assert list(points) == ["Base", "MR1", "MR2", "MR3", "MR4", "CMA"]
    for label, want in EXPECTED_ABLATION.items():
        got = points[label]
        assert abs(got - want) < 1e-9, f"{label}: {got} != {want}"


def write_palindrome():
    from fixture_programs import PALINDROME_DESCRIPTION, PALINDROME_PROGRAM
    from test_testcases import ORACLE_LINES

    record = {
        "task_id": "pal-1",
        "prompt": PALINDROME_DESCRIPTION,
        "entry_point": "sum_of_next_smallest_palindromes",
        "canonical_solution": PALINDROME_PROGRAM,
        "test": "\n".join(ORACLE_LINES),
    }
    (FIXTURES / "palindrome.jsonl").write_text(
        json.dumps(record) + "\n", encoding="utf-8"
    )
    store = FIXTURES / "replay_palindrome"
    store.mkdir(exist_ok=True)
    (store / ".gitkeep").write_text("")
    return store


def verify_testgen_replay(store):
    def run_once(out):
        cfg = RunConfig(
            dataset=str(FIXTURES / "palindrome.jsonl"),
            out=str(out),
            mrs=("MR5", "MR6", "MR8", "MR9"),
            seed=BASE_SEED,
            replay_dir=str(store),
        )
        return run_testgen(cfg)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        first = run_once(tmp / "a")
        records = read_ledger(first)
        first_bytes = first.read_bytes()
        second_bytes = run_once(tmp / "b").read_bytes()
    assert first_bytes == second_bytes, "testgen replay runs differ"
    valid = [
        r
        for r in records
        if r.kind == "test_variant" and r.payload["status"] == "valid"
    ]
    assert len(valid) == 15, f"expected 15 valid variants, found {len(valid)}"
    series = {r.payload["series"] for r in records if r.kind == "coverage"}
    assert series == {"base", "cma"}


def write_usage_ledger():
    path = FIXTURES / "usage_ledger.jsonl"
    if path.exists():
        path.unlink()
    ledger = Ledger(path, "usage-fixture")
    for module, task_id, prompt, completion in USAGE_ROWS:
        ledger.append(
            "llm_usage",
            {
                "module": module,
                "task_id": task_id,
                "prompt_tokens": prompt,
                "completion_tokens": completion,
                "estimated": False,
            },
        )
    view = [{"kind": r.kind, "payload": r.payload} for r in read_ledger(path)]
    summary = usage_summary(view)
    want = {"mutator": (205, 287), "generator": (258, 328), "base": (106, 91)}
    for module, (prompt, completion) in want.items():
        usage = summary[module]
        assert usage.avg_prompt == prompt, module
        assert usage.avg_completion == completion, module
    return path


def main():
    FIXTURES.mkdir(exist_ok=True)
    check_scores()
    print("rewrite scores verified against the 0.8 gate")
    write_gen_dataset()
    store = record_store()
    count = len(list(store.glob("*.json")))
    print(f"recorded {count} exchanges into {store}")
    verify_gen_replay(store)
    print("gen replay is byte-stable and reproduces '60 & 69 & +9'")
    verify_ablate_replay(store)
    print("ablate replays from the same store with the expected points")
    pal_store = write_palindrome()
    verify_testgen_replay(pal_store)
    print("testgen replay is byte-stable with 15 valid variants")
    write_usage_ledger()
    print("usage ledger reproduces the frozen per-module averages")
    print("fixtures rebuilt under", FIXTURES)


if __name__ == "__main__":
    main()
