"""Small arithmetic expression language for coefficients in config files.

Grammar: numbers, coordinate names, ``pi``, ``+ - * / **``, unary minus and
calls to sin, cos, exp, log, sqrt, recip.  Expressions compile to functions
that accept floats, arrays or dual numbers.
"""
from __future__ import annotations

import ast
import math
from typing import Callable, Sequence

from . import ad
from .fields import AnalyticField

FUNCTIONS = {"sin": ad.sin, "cos": ad.cos, "exp": ad.exp, "log": ad.log, "sqrt": ad.sqrt, "recip": ad.recip}
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    pass


def _build(node, names: dict[str, int], params: dict[str, float]) -> Callable:
    if isinstance(node, ast.Expression):
        return _build(node.body, names, params)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda x: v
    if isinstance(node, ast.Name):
        if node.id in names:
            i = names[node.id]
            return lambda x: x[i]
        if node.id in params:
            v = float(params[node.id])
            return lambda x: v
        if node.id in CONSTANTS:
            v = CONSTANTS[node.id]
            return lambda x: v
        raise ExprError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        f = _build(node.operand, names, params)
        return (lambda x: -f(x)) if isinstance(node.op, ast.USub) else f
    if isinstance(node, ast.BinOp):
        a, b = _build(node.left, names, params), _build(node.right, names, params)
        ops = {ast.Add: lambda x: a(x) + b(x), ast.Sub: lambda x: a(x) - b(x),
               ast.Mult: lambda x: a(x) * b(x), ast.Div: lambda x: a(x) / b(x),
               ast.Pow: lambda x: a(x) ** b(x)}
        for op, fn in ops.items():
            if isinstance(node.op, op):
                return fn
        raise ExprError(f"operator {type(node.op).__name__} not allowed")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise ExprError("only sin, cos, exp, log, sqrt, recip calls are allowed")
        if len(node.args) != 1:
            raise ExprError(f"{node.func.id} takes one argument")
        fn, arg = FUNCTIONS[node.func.id], _build(node.args[0], names, params)
        return lambda x: fn(arg(x))
    raise ExprError(f"unsupported syntax: {ast.dump(node)[:60]}")


def _num(v: float) -> ast.expr:
    return ast.Constant(float(v))


def _depends(node, var: str) -> bool:
    return any(isinstance(n, ast.Name) and n.id == var for n in ast.walk(node))


def _d(node, var: str) -> ast.expr:
    """Symbolic ∂node/∂var (no simplification beyond dropping constant branches)."""
    if not _depends(node, var):
        return _num(0.0)
    if isinstance(node, ast.Name):
        return _num(1.0)
    if isinstance(node, ast.UnaryOp):
        inner = _d(node.operand, var)
        return ast.UnaryOp(node.op, inner)
    if isinstance(node, ast.BinOp):
        a, b = node.left, node.right
        da, db = _d(a, var), _d(b, var)
        B = ast.BinOp
        if isinstance(node.op, (ast.Add, ast.Sub)):
            return B(da, node.op, db)
        if isinstance(node.op, ast.Mult):
            return B(B(da, ast.Mult(), b), ast.Add(), B(a, ast.Mult(), db))
        if isinstance(node.op, ast.Div):
            num = B(B(da, ast.Mult(), b), ast.Sub(), B(a, ast.Mult(), db))
            return B(num, ast.Div(), B(b, ast.Mult(), b))
        if isinstance(node.op, ast.Pow):
            if not _depends(b, var):
                return B(B(b, ast.Mult(), B(a, ast.Pow(), B(b, ast.Sub(), _num(1.0)))), ast.Mult(), da)
            log_a = ast.Call(ast.Name("log", ast.Load()), [a], [])
            inner = B(B(db, ast.Mult(), log_a), ast.Add(), B(b, ast.Mult(), B(da, ast.Div(), a)))
            return B(node, ast.Mult(), inner)
    if isinstance(node, ast.Call):
        u = node.args[0]
        du = _d(u, var)
        call = lambda f, arg: ast.Call(ast.Name(f, ast.Load()), [arg], [])
        B = ast.BinOp
        outer = {
            "sin": lambda: call("cos", u),
            "cos": lambda: ast.UnaryOp(ast.USub(), call("sin", u)),
            "exp": lambda: call("exp", u),
            "log": lambda: call("recip", u),
            "sqrt": lambda: B(_num(0.5), ast.Div(), call("sqrt", u)),
            "recip": lambda: ast.UnaryOp(ast.USub(), call("recip", B(u, ast.Mult(), u))),
        }[node.func.id]()
        return B(outer, ast.Mult(), du)
    raise ExprError(f"cannot differentiate {ast.dump(node)[:60]}")


def _parse(text: str):
    try:
        return ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as e:
        raise ExprError(f"cannot parse {text!r}: {e.msg}") from None


def derivative_expr(text: str, var: str, names: Sequence[str], params: dict[str, float] | None = None) -> Callable:
    """Compiled ∂/∂var of an expression (symbolic, so it composes with dual numbers)."""
    tree = _parse(text)
    _build(tree, {nm: i for i, nm in enumerate(names)}, params or {})   # validate first
    d = ast.fix_missing_locations(ast.Expression(_d(tree.body, var)))
    return _build(d, {nm: i for i, nm in enumerate(names)}, params or {})


def substitute(text: str, mapping: dict[str, str]) -> str:
    """Rewrite ``text`` with each name replaced by a parenthesised expression."""
    tree = _parse(text)
    repl = {k: _parse(v).body for k, v in mapping.items()}

    class _Sub(ast.NodeTransformer):
        def visit_Name(self, node):
            return repl.get(node.id, node)

    return ast.unparse(ast.fix_missing_locations(_Sub().visit(tree)))


def compile_expr(text: str, names: Sequence[str], params: dict[str, float] | None = None) -> Callable:
    """Function of a coordinate list for the expression ``text``."""
    tree = _parse(text)
    return _build(tree, {nm: i for i, nm in enumerate(names)}, params or {})


def expr_field(texts: str | Sequence[str], names: Sequence[str], params: dict[str, float] | None = None,
               label: str = "") -> AnalyticField:
    if isinstance(texts, str):
        texts = [texts]
    fns = [compile_expr(t, names, params) for t in texts]
    return AnalyticField(lambda x: [f(x) for f in fns], len(names), len(fns), label or ",".join(texts))
