"""Pre-condition and post-condition expression language.

Grammar for pre-conditions::

    cond    := or
    or      := and ("||" and)*
    and     := unary ("&&" unary)*
    unary   := "!" unary | primary
    primary := "state[" IDENT "]" "==" BOOL | "(" cond ")"

Post-conditions are lists of ``P=<float> -> state[<IDENT>] = <BOOL>`` entries,
separated by ``;`` when written as one string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from irs.model import And, ConditionExpr, Effect, Not, Or, VarEquals


class ConditionSyntaxError(ValueError):
    def __init__(self, message: str, position: int, source: str):
        super().__init__(f"{message} at position {position}: {source!r}")
        self.position = position
        self.source = source


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op>&&|\|\||==|!|\(|\)|\[|\])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


def tokenize(src: str) -> list[Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(src):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ConditionSyntaxError(f"unknown operator {m.group()!r}", m.start(), src)
        tokens.append(Token(kind, m.group(), m.start()))
    tokens.append(Token("eof", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = tokenize(src)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind == "op":
            self.advance()
            return True
        return False

    def expect(self, text: str, what: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ConditionSyntaxError(what or f"expected {text!r}, found {found}", tok.pos, self.src)

    def parse(self) -> ConditionExpr:
        expr = self.disjunction()
        tok = self.peek()
        if tok.kind != "eof":
            raise ConditionSyntaxError(f"unexpected token {tok.text!r}", tok.pos, self.src)
        return expr

    def disjunction(self) -> ConditionExpr:
        expr = self.conjunction()
        while self.accept("||"):
            expr = Or(expr, self.conjunction())
        return expr

    def conjunction(self) -> ConditionExpr:
        expr = self.unary()
        while self.accept("&&"):
            expr = And(expr, self.unary())
        return expr

    def unary(self) -> ConditionExpr:
        if self.accept("!"):
            return Not(self.unary())
        return self.primary()

    def primary(self) -> ConditionExpr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            expr = self.disjunction()
            if not self.accept(")"):
                raise ConditionSyntaxError("unterminated parenthesis", tok.pos, self.src)
            return expr
        if tok.kind == "ident" and tok.text == "state":
            self.advance()
            bracket = self.expect("[")
            name = self.peek()
            if name.kind != "ident":
                raise ConditionSyntaxError("expected variable name", name.pos, self.src)
            self.advance()
            if not self.accept("]"):
                raise ConditionSyntaxError("unterminated bracket", bracket.pos, self.src)
            self.expect("==")
            lit = self.advance()
            if lit.kind != "ident" or lit.text not in ("true", "false"):
                raise ConditionSyntaxError("expected true or false", lit.pos, self.src)
            return VarEquals(name.text, lit.text == "true")
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ConditionSyntaxError(f"unexpected token {found}", tok.pos, self.src)


def parse_condition(src: str) -> ConditionExpr:
    return _Parser(src).parse()


def format_condition(expr: ConditionExpr) -> str:
    """Render ``expr`` with the fewest parentheses that parse back to the same tree."""
    if isinstance(expr, VarEquals):
        return f"state[{expr.variable}] == {'true' if expr.value else 'false'}"
    if isinstance(expr, Not):
        inner = format_condition(expr.child)
        if isinstance(expr.child, (And, Or)):
            inner = f"({inner})"
        return f"!{inner}"
    if isinstance(expr, And):
        left = _wrap(expr.left, (Or,))
        right = _wrap(expr.right, (Or, And))
        return f"{left} && {right}"
    left = _wrap(expr.left, ())
    right = _wrap(expr.right, (Or,))
    return f"{left} || {right}"


def _wrap(expr: ConditionExpr, needs_parens: tuple) -> str:
    text = format_condition(expr)
    return f"({text})" if needs_parens and isinstance(expr, needs_parens) else text


# ---------------------------------------------------------------------------
# Effects

_NUM = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_EFFECT_RE = re.compile(
    rf"\s*P\s*=\s*(?P<p>[-+]?{_NUM})\s*->\s*state\s*\[\s*(?P<var>[A-Za-z_][A-Za-z0-9_\-]*)\s*\]"
    r"\s*=\s*(?P<val>true|false)\s*"
)
# legacy form: state[x] = rand(1)
_RAND_RE = re.compile(
    r"\s*state\s*\[\s*(?P<var>[A-Za-z_][A-Za-z0-9_\-]*)\s*\]\s*=\s*rand\s*\(\s*1\s*\)\s*"
)


class EffectSyntaxError(ValueError):
    pass


def parse_effects(src: Union[str, list], warnings: Optional[list] = None) -> list[Effect]:
    """Parse one post-condition string, or a list of them, into effects in order.

    Entries in a string are normally separated by ``;``; a missing separator
    between two complete entries is tolerated. The legacy ``rand(1)`` form is
    read as ``P=1 -> state[x] = true`` and reported through ``warnings``.
    """
    if isinstance(src, (list, tuple)):
        out: list[Effect] = []
        for item in src:
            out.extend(parse_effects(str(item), warnings))
        return out

    effects: list[Effect] = []
    pos = 0
    text = src.strip()
    while pos < len(text):
        m = _EFFECT_RE.match(text, pos)
        if m:
            p = float(m.group("p"))
            if not 0.0 <= p <= 1.0:
                raise EffectSyntaxError(f"probability {p} outside [0, 1] in {src!r}")
            effects.append(Effect(p, m.group("var"), m.group("val") == "true"))
        else:
            m = _RAND_RE.match(text, pos)
            if not m:
                raise EffectSyntaxError(f"malformed effect at position {pos}: {text[pos:]!r}")
            effects.append(Effect(1.0, m.group("var"), True))
            if warnings is not None:
                warnings.append(f"legacy rand(1) effect on {m.group('var')!r} read as P=1 -> true")
        pos = m.end()
        if pos < len(text) and text[pos] == ";":
            pos += 1
            while pos < len(text) and text[pos].isspace():
                pos += 1
    return effects


def format_effect(effect: Effect) -> str:
    return f"P={effect.probability!r} -> state[{effect.variable}] = {'true' if effect.value else 'false'}"


def format_effects(effects: list[Effect]) -> str:
    return "; ".join(format_effect(e) for e in effects)
