"""Branch instrumentation by AST rewriting.

Statement-level decisions are counted: ``if`` and ``while`` tests are
wrapped in a probe that records which way they went, and ``for`` iterables
are wrapped in a generator that records whether the loop was entered and
whether it ran to exhaustion.  Each decision contributes two outcomes to
the branch total.  Conditional expressions, comprehension guards, and
short-circuit operators are left alone; literal-constant tests such as
``while True`` are not counted since one of their outcomes is unreachable.
"""

from __future__ import annotations

import ast

BRANCH_PROBE = "__branch_probe__"
LOOP_PROBE = "__loop_probe__"


class BranchTracker:
    """Accumulates (branch id, outcome) pairs across any number of runs."""

    def __init__(self):
        self.outcomes = set()

    def branch(self, branch_id, value):
        self.outcomes.add((branch_id, bool(value)))
        return value

    def loop(self, branch_id, iterable):
        for item in iterable:
            self.outcomes.add((branch_id, True))
            yield item
        self.outcomes.add((branch_id, False))


class _Instrumenter(ast.NodeTransformer):
    def __init__(self):
        self.decision_count = 0

    def _probe(self, name, node):
        call = ast.Call(
            func=ast.Name(id=name, ctx=ast.Load()),
            args=[ast.Constant(self.decision_count), node],
            keywords=[],
        )
        self.decision_count += 1
        return ast.copy_location(call, node)

    def visit_If(self, node):
        self.generic_visit(node)
        if not isinstance(node.test, ast.Constant):
            node.test = self._probe(BRANCH_PROBE, node.test)
        return node

    def visit_While(self, node):
        self.generic_visit(node)
        if not isinstance(node.test, ast.Constant):
            node.test = self._probe(BRANCH_PROBE, node.test)
        return node

    def visit_For(self, node):
        self.generic_visit(node)
        node.iter = self._probe(LOOP_PROBE, node.iter)
        return node


def instrument_program(source: str, filename: str = "<program>"):
    """Compile source with branch probes.

    Returns (code object, branch total), where the total counts two
    outcomes per instrumented decision.  Raises SyntaxError as-is.
    """
    tree = ast.parse(source, filename)
    instrumenter = _Instrumenter()
    tree = instrumenter.visit(tree)
    ast.fix_missing_locations(tree)
    code = compile(tree, filename, "exec")
    return code, 2 * instrumenter.decision_count
