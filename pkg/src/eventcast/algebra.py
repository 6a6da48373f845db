"""Unary predicates over events and minterm generation.

Predicates are immutable formula trees. Leaves are ``TRUE``, ``FALSE``,
attribute/constant comparisons and named external predicates registered
with :func:`register_predicate`. A :class:`MintermSet` turns a list of atomic
predicates into a finite alphabet: every event satisfies exactly one
minterm, and the minterm id is the symbol fed to automata and models.
"""
from __future__ import annotations

import itertools
import math
import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EventError


@dataclass(frozen=True)
class Event:
    timestamp: int
    partition: str
    attributes: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Any:
        try:
            return self.attributes[name]
        except KeyError:
            raise EventError(f"missing attribute {name!r}", attribute=name) from None


class Predicate:
    """Base class of predicate formulas."""

    __slots__ = ()

    def __and__(self, other: "Predicate") -> "Predicate":
        return And(self, other)

    def __or__(self, other: "Predicate") -> "Predicate":
        return Or(self, other)

    def __invert__(self) -> "Predicate":
        return Not(self)


@dataclass(frozen=True)
class TrueP(Predicate):
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class FalseP(Predicate):
    def __str__(self) -> str:
        return "false"


TRUE = TrueP()
FALSE = FalseP()

_OPS: dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "=": operator.eq,
    "!=": operator.ne,
}
_NEGATED_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}
OP_ALIASES = {"==": "=", "≤": "<=", "≥": ">=", "≠": "!=", "<>": "!="}


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


@dataclass(frozen=True)
class Comparison(Predicate):
    attribute: str
    op: str
    value: float | str

    def __post_init__(self):
        op = OP_ALIASES.get(self.op, self.op)
        if op not in _OPS:
            raise ConfigError(f"unknown comparison operator {self.op!r}")
        object.__setattr__(self, "op", op)
        if isinstance(self.value, bool) or not (_is_number(self.value) or isinstance(self.value, str)):
            raise ConfigError(f"comparison constant must be a number or string, got {self.value!r}")
        if _is_number(self.value):
            object.__setattr__(self, "value", float(self.value))

    def __str__(self) -> str:
        if isinstance(self.value, str):
            v = '"' + self.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        else:
            v = format_number(self.value)
        return f"{self.attribute} {self.op} {v}"


@dataclass(frozen=True)
class Named(Predicate):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class And(Predicate):
    left: Predicate
    right: Predicate

    def __str__(self) -> str:
        return f"({self.left} and {self.right})"


@dataclass(frozen=True)
class Or(Predicate):
    left: Predicate
    right: Predicate

    def __str__(self) -> str:
        return f"({self.left} or {self.right})"


@dataclass(frozen=True)
class Not(Predicate):
    child: Predicate

    def __str__(self) -> str:
        return f"not {_wrap(self.child)}"


def _wrap(p: Predicate) -> str:
    s = str(p)
    return s if isinstance(p, (And, Or, TrueP, FalseP, Named)) else f"({s})"


def format_number(x: float) -> str:
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


# Named external predicates. Functions receive an Event and return a bool.
_EXTERNAL: dict[str, Callable[[Event], bool]] = {}


def register_predicate(name: str, fn: Callable[[Event], bool]) -> Named:
    """Register ``fn`` under ``name`` and return the predicate leaf for it."""
    if not name.isidentifier():
        raise ConfigError(f"predicate name must be an identifier: {name!r}")
    _EXTERNAL[name] = fn
    return Named(name)


def unregister_predicate(name: str) -> None:
    _EXTERNAL.pop(name, None)


def is_registered(name: str) -> bool:
    return name in _EXTERNAL


def _compare(c: Comparison, x: Any) -> bool:
    if isinstance(c.value, str):
        if not isinstance(x, str):
            raise EventError(f"attribute {c.attribute!r} is not a string", attribute=c.attribute)
    elif not _is_number(x):
        raise EventError(f"attribute {c.attribute!r} is not numeric", attribute=c.attribute)
    return bool(_OPS[c.op](x, c.value))


def eval_predicate(p: Predicate, e: Event) -> bool:
    if isinstance(p, Comparison):
        return _compare(p, e[p.attribute])
    if isinstance(p, TrueP):
        return True
    if isinstance(p, FalseP):
        return False
    if isinstance(p, And):
        return eval_predicate(p.left, e) and eval_predicate(p.right, e)
    if isinstance(p, Or):
        return eval_predicate(p.left, e) or eval_predicate(p.right, e)
    if isinstance(p, Not):
        return not eval_predicate(p.child, e)
    if isinstance(p, Named):
        try:
            fn = _EXTERNAL[p.name]
        except KeyError:
            raise ConfigError(f"unknown predicate {p.name!r}") from None
        return bool(fn(e))
    raise TypeError(f"not a predicate: {p!r}")


def eval_under(p: Predicate, assignment: Mapping[Predicate, bool]) -> bool:
    """Evaluate ``p`` with every atom's truth value taken from ``assignment``."""
    if isinstance(p, TrueP):
        return True
    if isinstance(p, FalseP):
        return False
    if isinstance(p, And):
        return eval_under(p.left, assignment) and eval_under(p.right, assignment)
    if isinstance(p, Or):
        return eval_under(p.left, assignment) or eval_under(p.right, assignment)
    if isinstance(p, Not):
        return not eval_under(p.child, assignment)
    return assignment[p]


def atoms_of(p: Predicate) -> list[Predicate]:
    """Comparison and named leaves of ``p`` in left-to-right order, deduplicated."""
    out: list[Predicate] = []

    def walk(q: Predicate) -> None:
        if isinstance(q, (And, Or)):
            walk(q.left)
            walk(q.right)
        elif isinstance(q, Not):
            walk(q.child)
        elif isinstance(q, (Comparison, Named)) and q not in out:
            out.append(q)

    walk(p)
    return out


# ---------------------------------------------------------------------------
# satisfiability by interval reasoning


def _conjunction_satisfiable(literals: Iterable[tuple[Predicate, bool]]) -> bool:
    """Interval reasoning over same-attribute comparisons.

    Returns False only when the comparison literals on some attribute cannot
    hold together. Named predicates are assumed satisfiable.
    """
    by_attr: dict[str, list[tuple[str, float | str]]] = {}
    for atom, polarity in literals:
        if isinstance(atom, Comparison):
            op = atom.op if polarity else _NEGATED_OP[atom.op]
            by_attr.setdefault(atom.attribute, []).append((op, atom.value))
    for constraints in by_attr.values():
        if not _feasible(constraints):
            return False
    return True


def _feasible(constraints: list[tuple[str, float | str]]) -> bool:
    kinds = {isinstance(v, str) for _, v in constraints}
    if len(kinds) > 1:
        # a string comparison and a numeric comparison on one attribute can only
        # both hold if one of them is a "!=" (the other type never equals it)
        constraints = [(op, v) for op, v in constraints if op != "!="]
        return len({isinstance(v, str) for _, v in constraints}) <= 1 and _feasible(constraints)
    eq = {v for op, v in constraints if op == "="}
    ne = {v for op, v in constraints if op == "!="}
    if len(eq) > 1:
        return False
    if kinds == {True}:
        ordered = [(op, v) for op, v in constraints if op not in ("=", "!=")]
        if ordered:
            # string ordering is lexicographic; only handle it through a witness check
            if eq:
                (v,) = eq
                return v not in ne and all(_OPS[op](v, c) for op, c in ordered)
            return True
        return not (eq and eq <= ne)
    lo, lo_strict, hi, hi_strict = -math.inf, True, math.inf, True
    for op, v in constraints:
        if op in (">", ">="):
            strict = op == ">"
            if v > lo or (v == lo and strict):
                lo, lo_strict = v, strict
        elif op in ("<", "<="):
            strict = op == "<"
            if v < hi or (v == hi and strict):
                hi, hi_strict = v, strict
    if eq:
        (v,) = eq
        if v in ne:
            return False
        above = v > lo or (v == lo and not lo_strict)
        below = v < hi or (v == hi and not hi_strict)
        return above and below
    if lo < hi:
        return True
    if lo == hi and not lo_strict and not hi_strict:
        return lo not in ne
    return False


# ---------------------------------------------------------------------------
# minterms


@dataclass(frozen=True)
class Minterm:
    """One symbol of the relabeled alphabet.

    ``polarity`` holds the full sign assignment over the atoms of the owning
    set. ``conjuncts`` is the simplified conjunction used for display and for
    :meth:`holds`: negative literals implied by a positive member of the same
    exclusion group are dropped.
    """

    id: int
    polarity: tuple[bool, ...]
    conjuncts: tuple[tuple[Predicate, bool], ...]

    def holds(self, e: Event) -> bool:
        return all(eval_predicate(p, e) == pol for p, pol in self.conjuncts)

    def describe(self) -> str:
        if not self.conjuncts:
            return "true"
        return " and ".join(str(p) if pol else f"not {_wrap(p)}" for p, pol in self.conjuncts)


def build_minterms(
    preds: Sequence[Predicate],
    exclusions: Sequence[Sequence[Predicate]] = (),
    *,
    interval_reasoning: bool = False,
    simplify: bool = True,
) -> list[Minterm]:
    """All sign assignments over ``preds`` that survive the exclusion groups.

    Assignments are enumerated with True before False per position, so the
    all-positive vector comes first and the all-negative one last. With
    ``interval_reasoning`` assignments whose comparisons on one attribute are
    contradictory are also dropped.
    """
    preds = list(preds)
    if not preds:
        raise ConfigError("minterm construction needs at least one predicate")
    if len(set(preds)) != len(preds):
        raise ConfigError("predicates must be deduplicated")
    for p in preds:
        if not isinstance(p, (Comparison, Named)):
            raise ConfigError(f"minterm atoms must be comparisons or named predicates, got {p}")
    index = {p: i for i, p in enumerate(preds)}
    groups: list[list[int]] = []
    for g in exclusions:
        try:
            idx = sorted({index[p] for p in g})
        except KeyError as exc:
            raise ConfigError(f"exclusion group refers to an unknown predicate {exc.args[0]}") from None
        if len(idx) > 1:
            groups.append(idx)

    out: list[Minterm] = []
    for bits in itertools.product((True, False), repeat=len(preds)):
        if any(sum(bits[i] for i in g) > 1 for g in groups):
            continue
        literals = list(zip(preds, bits))
        if interval_reasoning and not _conjunction_satisfiable(literals):
            continue
        dropped: set[int] = set()
        if simplify:
            for g in groups:
                if any(bits[i] for i in g):
                    dropped.update(i for i in g if not bits[i])
        conj = tuple(lit for i, lit in enumerate(literals) if i not in dropped)
        out.append(Minterm(len(out), tuple(bits), conj))
    if not out:
        raise ConfigError("every sign assignment is excluded; the exclusion groups are inconsistent")
    return out


class MintermSet:
    """The alphabet of a compiled pattern.

    Holds the atoms, their minterms and a lookup from the packed polarity
    code to the minterm id, so that events can be classified in bulk.
    """

    def __init__(
        self,
        atoms: Sequence[Predicate],
        exclusions: Sequence[Sequence[Predicate]] = (),
        *,
        interval_reasoning: bool = False,
    ):
        self.atoms = tuple(atoms)
        self.exclusions = tuple(tuple(g) for g in exclusions)
        self.interval_reasoning = interval_reasoning
        self.minterms = build_minterms(self.atoms, self.exclusions, interval_reasoning=interval_reasoning)
        self._lookup = np.full(1 << len(self.atoms), -1, dtype=np.int32)
        for m in self.minterms:
            self._lookup[self._code(m.polarity)] = m.id
        self._assign = [dict(zip(self.atoms, m.polarity)) for m in self.minterms]

    def __len__(self) -> int:
        return len(self.minterms)

    def __iter__(self):
        return iter(self.minterms)

    def __getitem__(self, i: int) -> Minterm:
        return self.minterms[i]

    @staticmethod
    def _code(bits: Sequence[bool]) -> int:
        # position 0 is the most significant bit, matching enumeration order
        code = 0
        for b in bits:
            code = (code << 1) | (0 if b else 1)
        return code

    def implies(self, symbol: int, p: Predicate) -> bool:
        """Whether every event classified as ``symbol`` satisfies ``p``."""
        return eval_under(p, self._assign[symbol])

    def classify(self, e: Event) -> int:
        """Minterm id of ``e``; raises :class:`EventError` when no minterm matches."""
        code = self._code([eval_predicate(a, e) for a in self.atoms])
        sym = int(self._lookup[code])
        if sym < 0:
            raise EventError("event violates the declared exclusions")
        return sym

    def classify_many(self, events: Sequence[Event]) -> np.ndarray:
        """Vectorised classification; events matching no minterm get -1."""
        n = len(events)
        code = np.zeros(n, dtype=np.int64)
        for atom in self.atoms:
            truth = evaluate_atom(atom, events)
            code = (code << 1) | (~truth).astype(np.int64)
        return self._lookup[code] if n else np.zeros(0, dtype=np.int32)

    def describe(self) -> list[str]:
        return [m.describe() for m in self.minterms]


def evaluate_atom(atom: Predicate, events: Sequence[Event]) -> np.ndarray:
    """Truth value of an atom on every event, as a boolean array."""
    n = len(events)
    if isinstance(atom, Comparison):
        try:
            values = [e.attributes[atom.attribute] for e in events]
        except KeyError:
            raise EventError(f"missing attribute {atom.attribute!r}", attribute=atom.attribute) from None
        if isinstance(atom.value, str):
            if not all(isinstance(v, str) for v in values):
                raise EventError(f"attribute {atom.attribute!r} is not a string", attribute=atom.attribute)
            col = np.array(values, dtype=object)
            return np.asarray(_OPS[atom.op](col, atom.value), dtype=bool).reshape(n)
        try:
            col = np.array(values, dtype=np.float64)
        except (TypeError, ValueError):
            raise EventError(f"attribute {atom.attribute!r} is not numeric", attribute=atom.attribute) from None
        if any(isinstance(v, (str, bool)) for v in values):
            raise EventError(f"attribute {atom.attribute!r} is not numeric", attribute=atom.attribute)
        return _OPS[atom.op](col, atom.value)
    return np.fromiter((eval_predicate(atom, e) for e in events), dtype=bool, count=n)
