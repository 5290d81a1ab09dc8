"""Estimand expression trees and their text form.

Text grammar (whitespace-insensitive)::

    expr    := factor ( '*' factor )*
    factor  := 'sum{' names '}(' expr ')'
             | 'ratio(' expr ',' expr ')'
             | 'prob(' assigns [ '|' assigns ] ')'
             | '1'
             | '(' expr ')'
    assigns := item ( ',' item )*      item := NAME | NAME '=' INT

``prob(Y|X=1,Z)`` conditions on the fixed state X=1 and the free variable Z.
A variable bound by ``sum`` shadows any free variable of the same name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import ParseError

__all__ = [
    "Prob",
    "Sum",
    "Product",
    "Quotient",
    "Constant",
    "Expr",
    "free_variables",
    "simplify",
    "to_text",
    "parse",
]


@dataclass(frozen=True)
class Prob:
    """P(targets | given) with some conditioners optionally pinned to states."""

    targets: tuple[str, ...]
    given: tuple[str, ...] = ()
    fixed: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "given", tuple(self.given))
        object.__setattr__(self, "fixed", tuple((str(n), int(s)) for n, s in self.fixed))
        if not self.targets:
            raise ValueError("prob term needs a target")


@dataclass(frozen=True)
class Sum:
    variables: tuple[str, ...]
    body: Expr

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))


@dataclass(frozen=True)
class Product:
    terms: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))


@dataclass(frozen=True)
class Quotient:
    numerator: Expr
    denominator: Expr


@dataclass(frozen=True)
class Constant:
    value: int = 1


Expr = Union[Prob, Sum, Product, Quotient, Constant]


def free_variables(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Prob):
        return frozenset(expr.targets) | frozenset(expr.given)
    if isinstance(expr, Sum):
        return free_variables(expr.body) - frozenset(expr.variables)
    if isinstance(expr, Product):
        out: frozenset[str] = frozenset()
        for t in expr.terms:
            out |= free_variables(t)
        return out
    if isinstance(expr, Quotient):
        return free_variables(expr.numerator) | free_variables(expr.denominator)
    return frozenset()


def simplify(expr: Expr) -> Expr:
    """Flatten nested products, drop unit constants, merge directly nested sums.

    No algebraic cancellation is attempted.
    """
    if isinstance(expr, Sum):
        body = simplify(expr.body)
        variables = list(expr.variables)
        if isinstance(body, Sum) and not set(body.variables) & set(variables):
            variables += list(body.variables)
            body = body.body
        if not variables:
            return body
        return Sum(tuple(variables), body)
    if isinstance(expr, Product):
        terms: list[Expr] = []
        for t in expr.terms:
            t = simplify(t)
            if isinstance(t, Product):
                terms.extend(t.terms)
            elif isinstance(t, Constant) and t.value == 1:
                continue
            else:
                terms.append(t)
        if not terms:
            return Constant(1)
        if len(terms) == 1:
            return terms[0]
        return Product(tuple(terms))
    if isinstance(expr, Quotient):
        num, den = simplify(expr.numerator), simplify(expr.denominator)
        if isinstance(den, Constant) and den.value == 1:
            return num
        return Quotient(num, den)
    return expr


# --- text form ---------------------------------------------------------------


def _assigns(names, fixed=()) -> str:
    return ",".join(list(names) + [f"{n}={s}" for n, s in fixed])


def to_text(expr: Expr) -> str:
    if isinstance(expr, Prob):
        head = _assigns(expr.targets)
        if expr.given or expr.fixed:
            return f"prob({head}|{_assigns(expr.given, expr.fixed)})"
        return f"prob({head})"
    if isinstance(expr, Sum):
        return f"sum{{{','.join(expr.variables)}}}( {to_text(expr.body)} )"
    if isinstance(expr, Product):
        parts = []
        for t in expr.terms:
            s = to_text(t)
            parts.append(f"({s})" if isinstance(t, Product) else s)
        return " * ".join(parts)
    if isinstance(expr, Quotient):
        return f"ratio({to_text(expr.numerator)}, {to_text(expr.denominator)})"
    if isinstance(expr, Constant):
        return str(expr.value)
    raise TypeError(f"not an estimand node: {expr!r}")


_TOKEN = re.compile(r"\s*(sum\{|ratio\(|prob\(|[A-Za-z_][A-Za-z0-9_.']*|\d+|[(){}|,*=])")


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ParseError(f"expected {expected!r}, got {tok!r}")
        self.i += 1
        return tok

    def name(self) -> str:
        tok = self.take()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.']*", tok):
            raise ParseError(f"expected a variable name, got {tok!r}")
        return tok

    def expr(self) -> Expr:
        terms = [self.factor()]
        while self.peek() == "*":
            self.take("*")
            terms.append(self.factor())
        return terms[0] if len(terms) == 1 else Product(tuple(terms))

    def assigns(self):
        names, fixed = [], []
        while True:
            n = self.name()
            if self.peek() == "=":
                self.take("=")
                state = self.take()
                if not state.isdigit():
                    raise ParseError(f"expected a state index after {n}=, got {state!r}")
                fixed.append((n, int(state)))
            else:
                names.append(n)
            if self.peek() != ",":
                return names, fixed
            self.take(",")

    def factor(self) -> Expr:
        tok = self.peek()
        if tok == "sum{":
            self.take()
            names = [self.name()]
            while self.peek() == ",":
                self.take(",")
                names.append(self.name())
            self.take("}")
            self.take("(")
            body = self.expr()
            self.take(")")
            return Sum(tuple(names), body)
        if tok == "ratio(":
            self.take()
            num = self.expr()
            self.take(",")
            den = self.expr()
            self.take(")")
            return Quotient(num, den)
        if tok == "prob(":
            self.take()
            targets, tfixed = self.assigns()
            if tfixed:
                raise ParseError("targets cannot carry fixed states")
            given, fixed = [], []
            if self.peek() == "|":
                self.take("|")
                given, fixed = self.assigns()
            self.take(")")
            return Prob(tuple(targets), tuple(given), tuple(fixed))
        if tok == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        if tok is not None and tok.isdigit():
            self.take()
            return Constant(int(tok))
        raise ParseError(f"unexpected token {tok!r}")


def parse(text: str) -> Expr:
    p = _Parser(text)
    out = p.expr()
    if p.peek() is not None:
        raise ParseError(f"trailing input at token {p.peek()!r}")
    return out
