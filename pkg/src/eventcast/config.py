"""Pattern configuration files and their compilation into automata."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .algebra import Comparison, MintermSet, Named, Predicate
from .algebra import atoms_of as formula_atoms
from .automata import DEFAULT_STATE_BUDGET, Dsfa, Sfa, compile_sfa, determinize
from .errors import ConfigError
from .pattern import Sre, atoms_of, contains_empty, parse_predicate, parse_sre, skip_till_any, to_streaming

POLICIES = ("strict", "skip-till-any")
ENRICHMENTS = ("amountDiff",)


@dataclass
class PatternConfig:
    """Contents of a pattern JSON file.

    ``predicates`` maps names to formula text, ``exclusions`` lists groups of
    predicate names that never hold together, and ``extraPredicates`` are
    formulas that refine the alphabet without appearing in the pattern.
    """

    pattern: str
    predicates: dict[str, str] = field(default_factory=dict)
    exclusions: list[list[str]] = field(default_factory=list)
    extra_predicates: list[str] = field(default_factory=list)
    policy: str = "strict"
    interval_reasoning: bool = False
    enrich: list[str] = field(default_factory=list)
    partition_attribute: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PatternConfig":
        known = {"pattern", "predicates", "exclusions", "extraPredicates", "policy",
                 "intervalReasoning", "enrich", "partitionAttribute"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown pattern config keys: {sorted(unknown)}")
        if "pattern" not in d or not isinstance(d["pattern"], str):
            raise ConfigError("pattern config needs a 'pattern' string")
        cfg = cls(
            pattern=d["pattern"],
            predicates=dict(d.get("predicates", {})),
            exclusions=[list(g) for g in d.get("exclusions", [])],
            extra_predicates=list(d.get("extraPredicates", [])),
            policy=d.get("policy", "strict"),
            interval_reasoning=bool(d.get("intervalReasoning", False)),
            enrich=list(d.get("enrich", [])),
            partition_attribute=d.get("partitionAttribute"),
        )
        if cfg.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {cfg.policy!r}")
        for name in cfg.enrich:
            if name not in ENRICHMENTS:
                raise ConfigError(f"unknown enrichment {name!r}; known: {ENRICHMENTS}")
        return cfg

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"pattern": self.pattern, "predicates": self.predicates,
                             "exclusions": self.exclusions, "extraPredicates": self.extra_predicates,
                             "policy": self.policy}
        if self.interval_reasoning:
            d["intervalReasoning"] = True
        if self.enrich:
            d["enrich"] = self.enrich
        if self.partition_attribute:
            d["partitionAttribute"] = self.partition_attribute
        return d

    @classmethod
    def load(cls, path: str | Path) -> "PatternConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass
class CompiledPattern:
    config: PatternConfig
    sre: Sre
    streaming: Sre
    minterms: MintermSet
    sfa: Sfa
    dsfa: Dsfa


def resolve_predicates(defs: Mapping[str, str]) -> dict[str, Predicate]:
    """Parse named predicate definitions; later ones may refer to earlier ones."""
    table: dict[str, Predicate] = {}
    for name, text in defs.items():
        if not name.isidentifier():
            raise ConfigError(f"predicate name must be an identifier: {name!r}")
        table[name] = parse_predicate(text, table) if isinstance(text, str) else _bad(name)
    return table


def _bad(name: str):
    raise ConfigError(f"predicate {name!r} must be given as a string")


def compile_pattern(cfg: PatternConfig, max_states: int = DEFAULT_STATE_BUDGET) -> CompiledPattern:
    table = resolve_predicates(cfg.predicates)
    sre = parse_sre(cfg.pattern, table)
    if contains_empty(sre):
        raise ConfigError("the pattern contains the empty language and cannot be compiled")
    if cfg.policy == "skip-till-any":
        sre = skip_till_any(sre)
    streaming = to_streaming(sre)
    atoms = atoms_of(streaming)
    for text in cfg.extra_predicates:
        for a in formula_atoms(parse_predicate(text, table)):
            if a not in atoms:
                atoms.append(a)
    if not atoms:
        raise ConfigError("the pattern uses no predicates besides true/false")
    groups = []
    for g in cfg.exclusions:
        members = []
        for name in g:
            p = table.get(name) or parse_predicate(name, table)
            if not isinstance(p, (Comparison, Named)):
                raise ConfigError(f"exclusion member {name!r} must be a single comparison or named predicate")
            if p not in atoms:
                raise ConfigError(f"exclusion member {name!r} does not occur in the pattern")
            members.append(p)
        groups.append(members)
    minterms = MintermSet(atoms, groups, interval_reasoning=cfg.interval_reasoning)
    sfa = compile_sfa(streaming)
    dsfa = determinize(sfa, minterms, max_states)
    return CompiledPattern(cfg, sre, streaming, minterms, sfa, dsfa)

