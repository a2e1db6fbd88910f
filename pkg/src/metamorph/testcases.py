"""Parsing, rendering, and canonicalization of assert-style test cases.

A test case is a single line of the form ``assert CALL(args...) == EXPR``
where the arguments are literals (scalars, lists, tuples, dicts) or constant
arithmetic over integers and floats, and the expected side is constant
arithmetic or a literal. Everything else is a ParseError, which signals that
the case cannot be transformed by the rule engine.

Values are represented as plain Python objects. Argument expressions keep
their tree structure (some transformation rules rewrite it); the expected
side is constant-folded to a single value at parse time, and rendering
always emits the folded value.
"""

from __future__ import annotations

import ast
import dataclasses
import math

from .errors import ParseError, RenderError

_BIN_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "//": lambda a, b: a // b,
    "%": lambda a, b: a % b,
}

_AST_OPS = {
    ast.Add: "+",
    ast.Sub: "-",
    ast.Mult: "*",
    ast.FloorDiv: "//",
    ast.Mod: "%",
}

_SCALAR_TYPES = (int, float, str, bool, type(None))


def _require_number(value):
    # bool is an int subclass but is not a number for our purposes
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"arithmetic over non-numeric operand {value!r}")


@dataclasses.dataclass(frozen=True)
class ConstExpr:
    """A constant expression tree node with its evaluated value.

    ``op`` is "lit" for leaves, "neg" for unary minus, or one of the
    binary operators. The evaluated value is computed at construction
    and never changes.
    """

    op: str
    value: object
    operands: tuple[ConstExpr, ...] = ()

    @staticmethod
    def literal(value) -> ConstExpr:
        return ConstExpr("lit", value)

    @staticmethod
    def binary(op: str, left: ConstExpr, right: ConstExpr) -> ConstExpr:
        if op not in _BIN_OPS:
            raise ParseError(f"unsupported operator {op!r}")
        _require_number(left.value)
        _require_number(right.value)
        try:
            value = _BIN_OPS[op](left.value, right.value)
        except ZeroDivisionError:
            raise ParseError("division by zero in constant expression") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise ParseError("constant expression overflows to a non-finite float")
        return ConstExpr(op, value, (left, right))

    @staticmethod
    def negate(operand: ConstExpr) -> ConstExpr:
        _require_number(operand.value)
        return ConstExpr("neg", -operand.value, (operand,))


@dataclasses.dataclass
class AssertionCase:
    """One parsed assert-equality test case.

    ``expected`` is None while the expected value is pending oracle
    determination. ``raw`` keeps the original text verbatim and does not
    participate in structural equality.
    """

    callee: str
    args: tuple[ConstExpr, ...]
    expected: ConstExpr | None
    raw: str = dataclasses.field(default="", compare=False)


def _const_value(node: ast.expr):
    """Fold an AST node to a plain literal value."""
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, _SCALAR_TYPES):
            raise ParseError(f"unsupported literal {node.value!r}")
        return node.value
    if isinstance(node, ast.List):
        return [_const_value(e) for e in node.elts]
    if isinstance(node, ast.Tuple):
        return tuple(_const_value(e) for e in node.elts)
    if isinstance(node, ast.Dict):
        out = {}
        for key_node, value_node in zip(node.keys, node.values):
            if key_node is None:
                raise ParseError("dict unpacking is not a literal")
            try:
                out[_const_value(key_node)] = _const_value(value_node)
            except TypeError:
                raise ParseError("unhashable dict key") from None
        return out
    if isinstance(node, (ast.BinOp, ast.UnaryOp)):
        return _parse_expr(node).value
    raise ParseError(f"unsupported expression node {type(node).__name__}")


def _parse_expr(node: ast.expr) -> ConstExpr:
    """Parse an AST node into a ConstExpr, keeping arithmetic structure."""
    if isinstance(node, ast.BinOp):
        op = _AST_OPS.get(type(node.op))
        if op is None:
            raise ParseError(f"unsupported operator {type(node.op).__name__}")
        return ConstExpr.binary(op, _parse_expr(node.left), _parse_expr(node.right))
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, ast.USub):
            raise ParseError(f"unsupported unary operator {type(node.op).__name__}")
        inner = node.operand
        if isinstance(inner, ast.Constant) and not isinstance(inner.value, bool) \
                and isinstance(inner.value, (int, float)):
            # a negative number is a literal, not an expression
            return ConstExpr.literal(-inner.value)
        return ConstExpr.negate(_parse_expr(inner))
    if isinstance(node, (ast.List, ast.Tuple, ast.Dict)):
        return ConstExpr.literal(_const_value(node))
    if isinstance(node, ast.Constant):
        return ConstExpr.literal(_const_value(node))
    raise ParseError(f"unsupported expression node {type(node).__name__}")


def parse_test_case(text: str) -> AssertionCase:
    """Parse one assert-equality line into an AssertionCase.

    Raises ParseError for anything outside the supported grammar, which
    routes the case to LLM-based mutation or skipping.
    """
    try:
        module = ast.parse(text.strip())
    except (SyntaxError, ValueError) as exc:
        raise ParseError(f"not parseable as Python: {exc}") from None
    if len(module.body) != 1 or not isinstance(module.body[0], ast.Assert):
        raise ParseError("expected exactly one assert statement")
    statement = module.body[0]
    if statement.msg is not None:
        raise ParseError("assert messages are not supported")
    test = statement.test
    if (
        not isinstance(test, ast.Compare)
        or len(test.ops) != 1
        or not isinstance(test.ops[0], ast.Eq)
    ):
        raise ParseError("assert must be a single equality comparison")
    call = test.left
    if not isinstance(call, ast.Call) or not isinstance(call.func, ast.Name):
        raise ParseError("left side must be a call of a plain identifier")
    if call.keywords:
        raise ParseError("keyword arguments are not supported")
    args = []
    for arg_node in call.args:
        if isinstance(arg_node, ast.Starred):
            raise ParseError("starred arguments are not supported")
        args.append(_parse_expr(arg_node))
    expected_value = _parse_expr(test.comparators[0]).value
    return AssertionCase(
        callee=call.func.id,
        args=tuple(args),
        expected=ConstExpr.literal(expected_value),
        raw=text,
    )


def render_value(value) -> str:
    """Render a literal value as Python source.

    repr() of the supported literal types is already valid literal syntax
    with deterministic spacing, so rendering relies on it directly.
    """
    return repr(value)


_PRECEDENCE = {"lit": 9, "neg": 3, "*": 2, "//": 2, "%": 2, "+": 1, "-": 1}


def render_expr(expr: ConstExpr) -> str:
    if expr.op == "lit":
        return render_value(expr.value)
    if expr.op == "neg":
        inner = render_expr(expr.operands[0])
        if _PRECEDENCE[expr.operands[0].op] < _PRECEDENCE["neg"]:
            return f"-({inner})"
        return f"-{inner}"
    left, right = expr.operands
    left_text = render_expr(left)
    right_text = render_expr(right)
    if _PRECEDENCE[left.op] < _PRECEDENCE[expr.op]:
        left_text = f"({left_text})"
    # right side needs parens at equal precedence to keep left-association
    if _PRECEDENCE[right.op] <= _PRECEDENCE[expr.op]:
        right_text = f"({right_text})"
    return f"{left_text} {expr.op} {right_text}"


def render_test_case(case: AssertionCase) -> str:
    """Render a case back to a single assert line.

    The expected side is always the constant-folded value; the argument
    side keeps its expression structure.
    """
    if case.expected is None:
        raise RenderError("expected value is pending oracle determination")
    args = ", ".join(render_expr(a) for a in case.args)
    return f"assert {case.callee}({args}) == {render_value(case.expected.value)}"


def render_call(case: AssertionCase) -> str:
    """Render only the invocation side, usable as a value-probe expression."""
    args = ", ".join(render_expr(a) for a in case.args)
    return f"{case.callee}({args})"


def _canon(value) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        # nine significant digits, so nearly-equal floats share one key
        return format(value, ".9g")
    if value is None:
        return "None"
    if isinstance(value, str):
        return repr(value)
    if isinstance(value, list):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    if isinstance(value, tuple):
        return "(" + ",".join(_canon(v) for v in value) + ")"
    if isinstance(value, dict):
        pairs = sorted(f"{_canon(k)}:{_canon(v)}" for k, v in value.items())
        return "{" + ",".join(pairs) + "}"
    raise RenderError(f"cannot canonicalize value of type {type(value).__name__}")


def canonical_key(case: AssertionCase) -> str:
    """Deterministic key over callee, evaluated args, and evaluated expected.

    Insensitive to whitespace and to the written form of constant
    expressions. A pending expected value contributes a placeholder.
    """
    args = ",".join(_canon(a.value) for a in case.args)
    expected = "?" if case.expected is None else _canon(case.expected.value)
    return f"{case.callee}({args})=={expected}"


def canonical_input_key(case: AssertionCase) -> str:
    """Canonical key over the input portion only, ignoring the expected side."""
    args = ",".join(_canon(a.value) for a in case.args)
    return f"{case.callee}({args})==?"


# Ledger payload codec. JSON alone cannot round-trip tuples, non-string dict
# keys, or the bool/int distinction inside containers, so values are tagged.

def value_to_payload(value):
    if isinstance(value, bool):
        return ["b", value]
    if isinstance(value, int):
        return ["i", value]
    if isinstance(value, float):
        return ["f", value]
    if isinstance(value, str):
        return ["s", value]
    if value is None:
        return ["z"]
    if isinstance(value, list):
        return ["l", [value_to_payload(v) for v in value]]
    if isinstance(value, tuple):
        return ["t", [value_to_payload(v) for v in value]]
    if isinstance(value, dict):
        return ["d", [[value_to_payload(k), value_to_payload(v)] for k, v in value.items()]]
    raise RenderError(f"cannot serialize value of type {type(value).__name__}")


def value_from_payload(payload):
    tag = payload[0]
    if tag in ("b", "i", "f", "s"):
        return payload[1]
    if tag == "z":
        return None
    if tag == "l":
        return [value_from_payload(v) for v in payload[1]]
    if tag == "t":
        return tuple(value_from_payload(v) for v in payload[1])
    if tag == "d":
        return {value_from_payload(k): value_from_payload(v) for k, v in payload[1]}
    raise ValueError(f"unknown value tag {tag!r}")


def expr_to_payload(expr: ConstExpr) -> dict:
    return {
        "op": expr.op,
        "value": value_to_payload(expr.value),
        "operands": [expr_to_payload(o) for o in expr.operands],
    }


def expr_from_payload(payload: dict) -> ConstExpr:
    return ConstExpr(
        payload["op"],
        value_from_payload(payload["value"]),
        tuple(expr_from_payload(o) for o in payload["operands"]),
    )


def case_to_payload(case: AssertionCase) -> dict:
    return {
        "callee": case.callee,
        "args": [expr_to_payload(a) for a in case.args],
        "expected": None if case.expected is None else expr_to_payload(case.expected),
        "raw": case.raw,
    }


def case_from_payload(payload: dict) -> AssertionCase:
    expected = payload["expected"]
    return AssertionCase(
        callee=payload["callee"],
        args=tuple(expr_from_payload(a) for a in payload["args"]),
        expected=None if expected is None else expr_from_payload(expected),
        raw=payload["raw"],
    )
