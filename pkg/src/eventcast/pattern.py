"""Symbolic regular expressions: syntax tree, parser, rewrites and a membership oracle.

Grammar (precedence star > concatenation > union)::

    expr   := term ('+' term)*
    term   := factor (';'? factor)*
    factor := atom '*'*
    atom   := name | comparison | '(' comparison ')' | '{' formula '}'
            | 'true' | 'false' | 'eps' | 'empty' | '(' expr ')'

``name`` resolves against the predicate table handed to the parser and then
against registered external predicates. ``formula`` accepts ``and``, ``or``,
``not`` and parentheses over comparisons and names.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

from . import algebra
from .algebra import FALSE, TRUE, And, Comparison, MintermSet, Named, Not, Or, Predicate
from .errors import PatternSyntaxError, UnknownPredicateError


class Sre:
    __slots__ = ()

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Epsilon(Sre):
    pass


@dataclass(frozen=True)
class Empty(Sre):
    pass


@dataclass(frozen=True)
class Pred(Sre):
    pred: Predicate


@dataclass(frozen=True)
class Union(Sre):
    left: Sre
    right: Sre


@dataclass(frozen=True)
class Concat(Sre):
    left: Sre
    right: Sre


@dataclass(frozen=True)
class Star(Sre):
    child: Sre


EPS = Epsilon()
EMPTY = Empty()
ANY = Pred(TRUE)


def star(r: Sre) -> Sre:
    """Kleene star with the normalisation eps* = eps."""
    return EPS if isinstance(r, Epsilon) else Star(r)


def concat(*parts: Sre) -> Sre:
    out = parts[0]
    for p in parts[1:]:
        out = Concat(out, p)
    return out


def union(*parts: Sre) -> Sre:
    out = parts[0]
    for p in parts[1:]:
        out = Union(out, p)
    return out


def size(r: Sre) -> int:
    if isinstance(r, (Union, Concat)):
        return 1 + size(r.left) + size(r.right)
    if isinstance(r, Star):
        return 1 + size(r.child)
    return 1


def depth(r: Sre) -> int:
    if isinstance(r, (Union, Concat)):
        return 1 + max(depth(r.left), depth(r.right))
    if isinstance(r, Star):
        return 1 + depth(r.child)
    return 0


def predicates_of(r: Sre) -> list[Predicate]:
    out: list[Predicate] = []

    def walk(x: Sre) -> None:
        if isinstance(x, Pred):
            if x.pred not in out:
                out.append(x.pred)
        elif isinstance(x, (Union, Concat)):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, Star):
            walk(x.child)

    walk(r)
    return out


def atoms_of(r: Sre) -> list[Predicate]:
    out: list[Predicate] = []
    for p in predicates_of(r):
        for a in algebra.atoms_of(p):
            if a not in out:
                out.append(a)
    return out


def contains_empty(r: Sre) -> bool:
    if isinstance(r, Empty):
        return True
    if isinstance(r, (Union, Concat)):
        return contains_empty(r.left) or contains_empty(r.right)
    if isinstance(r, Star):
        return contains_empty(r.child)
    return False


# ---------------------------------------------------------------------------
# rewrites


def to_streaming(r: Sre) -> Sre:
    """The expression true* ; r, whose matches end at every detection point."""
    return Concat(Star(ANY), r)


def skip_till_any(r: Sre) -> Sre:
    """Insert true* between the two operands of every concatenation."""
    if isinstance(r, Concat):
        return Concat(Concat(skip_till_any(r.left), Star(ANY)), skip_till_any(r.right))
    if isinstance(r, Union):
        return Union(skip_till_any(r.left), skip_till_any(r.right))
    if isinstance(r, Star):
        return Star(skip_till_any(r.child))
    return r


# ---------------------------------------------------------------------------
# membership oracle


def sre_membership(r: Sre, word: Sequence[int], minterms: MintermSet) -> bool:
    """Decide ``word`` in L(r) straight from the inductive definition.

    ``word`` is a sequence of minterm ids. A predicate accepts a symbol when the
    minterm implies it. Star is handled by trying every first split point.
    """
    word = tuple(word)
    n = len(word)

    @lru_cache(maxsize=None)
    def sat(p: Predicate, sym: int) -> bool:
        return minterms.implies(sym, p)

    @lru_cache(maxsize=None)
    def m(x: Sre, i: int, j: int) -> bool:
        if isinstance(x, Epsilon):
            return i == j
        if isinstance(x, Empty):
            return False
        if isinstance(x, Pred):
            return j == i + 1 and sat(x.pred, word[i])
        if isinstance(x, Union):
            return m(x.left, i, j) or m(x.right, i, j)
        if isinstance(x, Concat):
            return any(m(x.left, i, k) and m(x.right, k, j) for k in range(i, j + 1))
        if isinstance(x, Star):
            if i == j:
                return True
            return any(m(x.child, i, k) and m(x, k, j) for k in range(i + 1, j + 1))
        raise TypeError(f"not an expression: {x!r}")

    return m(r, 0, n)


# ---------------------------------------------------------------------------
# printing


def _pred_text(p: Predicate) -> str:
    if p == TRUE:
        return "true"
    if p == FALSE:
        return "false"
    if isinstance(p, Named):
        return p.name
    if isinstance(p, Comparison):
        return f"({p})"
    return "{" + str(p) + "}"


def pretty(r: Sre) -> str:
    """Text form of ``r``; parsing it gives back an equal tree."""
    if isinstance(r, Epsilon):
        return "eps"
    if isinstance(r, Empty):
        return "empty"
    if isinstance(r, Pred):
        return _pred_text(r.pred)
    if isinstance(r, Union):
        right = pretty(r.right)
        if isinstance(r.right, Union):
            right = f"({right})"
        return f"{pretty(r.left)} + {right}"
    if isinstance(r, Concat):
        left, right = pretty(r.left), pretty(r.right)
        if isinstance(r.left, Union):
            left = f"({left})"
        if isinstance(r.right, (Union, Concat)):
            right = f"({right})"
        return f"{left} ; {right}"
    if isinstance(r, Star):
        inner = pretty(r.child)
        if isinstance(r.child, (Union, Concat)):
            inner = f"({inner})"
        return f"{inner}*"
    raise TypeError(f"not an expression: {r!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<str>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<op><=|>=|==|!=|<>|<|>|=|≤|≥|≠)
  | (?P<logic>&&|\|\||∧|∨|¬|!)
  | (?P<punct>[()+;*{}])
  | (?P<sym>[⊤⊥ε∅])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"true", "false", "eps", "empty", "and", "or", "not"}
_SYMBOL_WORDS = {"⊤": "true", "⊥": "false", "ε": "eps", "∅": "empty", "∧": "and", "∨": "or",
                 "¬": "not", "&&": "and", "||": "or", "!": "not"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    i = 0
    while i < len(text):
        mo = _TOKEN.match(text, i)
        if mo is None:
            raise PatternSyntaxError(f"unexpected character {text[i]!r}", i)
        kind = mo.lastgroup
        tok = mo.group()
        if kind == "num" and tok[0] in "+-" and out and out[-1].kind not in ("op",):
            # a leading sign only belongs to a number right after a comparison operator
            out.append(_Tok("punct", tok[0], i))
            i += 1
            continue
        if kind in ("sym", "logic"):
            kind, tok = "ident", _SYMBOL_WORDS[tok]
        if kind != "ws":
            out.append(_Tok(kind, tok, i))
        i = mo.end()
    out.append(_Tok("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, predicates: Mapping[str, Predicate]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.predicates = predicates

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind in ("str",):
            found = self.tok.text or "end of input"
            raise PatternSyntaxError(f"expected {text!r}, found {found!r}", self.tok.pos)
        self.advance()

    def fail(self, what: str):
        found = self.tok.text or "end of input"
        raise PatternSyntaxError(f"expected {what}, found {found!r}", self.tok.pos)

    # --- expressions -----------------------------------------------------

    def parse_pattern(self) -> Sre:
        r = self.expr()
        if self.tok.kind != "end":
            self.fail("end of pattern")
        return r

    def expr(self) -> Sre:
        r = self.term()
        while self.tok.text == "+" and self.tok.kind == "punct":
            self.advance()
            r = Union(r, self.term())
        return r

    def _starts_factor(self) -> bool:
        t = self.tok
        if t.kind == "ident":
            return t.text not in ("and", "or", "not")
        return t.kind == "punct" and t.text in ("(", "{")

    def term(self) -> Sre:
        r = self.factor()
        while True:
            if self.tok.kind == "punct" and self.tok.text == ";":
                self.advance()
                r = Concat(r, self.factor())
            elif self._starts_factor():
                r = Concat(r, self.factor())
            else:
                return r

    def factor(self) -> Sre:
        r = self.atom()
        while self.tok.kind == "punct" and self.tok.text == "*":
            self.advance()
            r = star(r)
        return r

    def atom(self) -> Sre:
        t = self.tok
        if t.kind == "punct" and t.text == "(":
            if self.peek().kind == "ident" and self.peek(2).kind == "op":
                self.advance()
                p = self.comparison()
                self.expect(")")
                return Pred(p)
            self.advance()
            r = self.expr()
            self.expect(")")
            return r
        if t.kind == "punct" and t.text == "{":
            self.advance()
            p = self.formula()
            self.expect("}")
            return Pred(p)
        if t.kind == "ident":
            if self.peek().kind == "op":
                return Pred(self.comparison())
            self.advance()
            if t.text == "true":
                return ANY
            if t.text == "false":
                return Pred(FALSE)
            if t.text == "eps":
                return EPS
            if t.text == "empty":
                return EMPTY
            if t.text in _KEYWORDS:
                raise PatternSyntaxError(f"unexpected keyword {t.text!r}", t.pos)
            return Pred(self.resolve(t))
        self.fail("a predicate or '('")

    # --- predicate formulas ---------------------------------------------

    def resolve(self, t: _Tok) -> Predicate:
        if t.text in self.predicates:
            return self.predicates[t.text]
        if algebra.is_registered(t.text):
            return Named(t.text)
        raise UnknownPredicateError(t.text)

    def comparison(self) -> Comparison:
        attr = self.advance()
        if attr.kind != "ident" or attr.text in _KEYWORDS:
            raise PatternSyntaxError("expected an attribute name", attr.pos)
        op = self.advance()
        if op.kind != "op":
            raise PatternSyntaxError("expected a comparison operator", op.pos)
        val = self.advance()
        if val.kind == "num":
            value: float | str = float(val.text)
        elif val.kind == "str":
            value = re.sub(r"\\(.)", r"\1", val.text[1:-1])
        else:
            raise PatternSyntaxError("expected a number or quoted string", val.pos)
        return Comparison(attr.text, op.text, value)

    def formula(self) -> Predicate:
        p = self.conj()
        while self.tok.kind == "ident" and self.tok.text == "or":
            self.advance()
            p = Or(p, self.conj())
        return p

    def conj(self) -> Predicate:
        p = self.neg()
        while self.tok.kind == "ident" and self.tok.text == "and":
            self.advance()
            p = And(p, self.neg())
        return p

    def neg(self) -> Predicate:
        if self.tok.kind == "ident" and self.tok.text == "not":
            self.advance()
            return Not(self.neg())
        t = self.tok
        if t.kind == "punct" and t.text == "(":
            self.advance()
            p = self.formula()
            self.expect(")")
            return p
        if t.kind == "ident":
            if self.peek().kind == "op":
                return self.comparison()
            self.advance()
            if t.text == "true":
                return TRUE
            if t.text == "false":
                return FALSE
            if t.text in _KEYWORDS:
                raise PatternSyntaxError(f"unexpected keyword {t.text!r}", t.pos)
            return self.resolve(t)
        self.fail("a comparison or predicate name")

    def parse_formula(self) -> Predicate:
        p = self.formula()
        if self.tok.kind != "end":
            self.fail("end of predicate")
        return p


def parse_sre(text: str, predicates: Mapping[str, Predicate] | None = None) -> Sre:
    return _Parser(text, predicates or {}).parse_pattern()


def parse_predicate(text: str, predicates: Mapping[str, Predicate] | None = None) -> Predicate:
    return _Parser(text, predicates or {}).parse_formula()
