"""Parse user expressions (potentials, conformal factors) into jet-aware callables."""

from __future__ import annotations

import sympy

from . import jets as J

_LOCALS = {"sech": sympy.sech, "atan": sympy.atan, "pi": sympy.pi, "E": sympy.E}


def parse(text: str, variables: tuple[str, ...]):
    """Return ``(fn, expr)`` where ``fn(*vars)`` evaluates ``text`` on jets or arrays."""
    syms = sympy.symbols(variables)
    local = dict(_LOCALS)
    local.update({s.name: s for s in syms})
    try:
        expr = sympy.sympify(text, locals=local)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from None
    unknown = {s.name for s in expr.free_symbols} - set(variables)
    if unknown:
        raise ValueError(f"unknown symbols {sorted(unknown)} in {text!r}; allowed: {list(variables)}")
    fn = sympy.lambdify(syms, expr, modules=[J.NAMESPACE])
    return fn, expr
