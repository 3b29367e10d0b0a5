"""Three-valued implicative dependency rules and synchronous cascade propagation.

Entities hold one of three operability states (0 failed, 1 degraded, 2 fully
operational). A rule ties a target to a disjunction of conjunctions (minterms)
over other entities; conjunction is min, disjunction is max. Hard rules
propagate full failure, soft rules floor at degraded. Rounds are synchronous,
states never increase, and propagation always reaches a fixed point.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

FAILED = 0
DEGRADED = 1
OPERATIONAL = 2

RULE_KINDS = ("hard", "soft")

_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


class RuleSyntaxError(ValueError):
    """Bad DSL input; message carries the 1-based line number."""


class RuleLinkError(KeyError):
    """A rule references an entity id that does not exist in the network."""


@dataclass(frozen=True)
class DependencyRule:
    target: str
    kind: str
    minterms: tuple[tuple[str, ...], ...]

    def referenced(self) -> set[str]:
        return {name for term in self.minterms for name in term}


def parse_rules(text: str) -> list[DependencyRule]:
    """Parse the one-rule-per-line DSL.

    Grammar: `<target> <- <hard|soft>: <id> [& <id>]* [| <id> [& <id>]*]*`
    with `#` comments. Duplicate targets are allowed; multiple rules conjoin.
    """
    rules: list[DependencyRule] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "<-" not in line:
            raise RuleSyntaxError(f"line {line_number}: missing '<-'")
        target_part, rhs = line.split("<-", 1)
        target = target_part.strip()
        if not _ID_RE.match(target):
            raise RuleSyntaxError(f"line {line_number}: bad target id {target!r}")
        if ":" not in rhs:
            raise RuleSyntaxError(f"line {line_number}: missing ':' after rule kind")
        kind_part, expr = rhs.split(":", 1)
        kind = kind_part.strip()
        if kind not in RULE_KINDS:
            raise RuleSyntaxError(f"line {line_number}: rule kind must be hard or soft, got {kind!r}")
        minterms = []
        for term_text in expr.split("|"):
            members = []
            for token in term_text.split("&"):
                name = token.strip()
                if not _ID_RE.match(name):
                    raise RuleSyntaxError(f"line {line_number}: bad entity id {name!r}")
                if name == target:
                    raise RuleSyntaxError(
                        f"line {line_number}: rule for {target!r} references itself"
                    )
                members.append(name)
            if not members:
                raise RuleSyntaxError(f"line {line_number}: empty minterm")
            minterms.append(tuple(members))
        rules.append(DependencyRule(target, kind, tuple(minterms)))
    return rules


def link_rules(rules, entity_ids) -> dict[str, list[DependencyRule]]:
    """Group rules by target, verifying every referenced id exists."""
    known = set(entity_ids)
    by_target: dict[str, list[DependencyRule]] = {}
    for rule in rules:
        unknown = sorted(({rule.target} | rule.referenced()) - known)
        if unknown:
            raise RuleLinkError(f"rule for {rule.target!r} references unknown entities {unknown}")
        by_target.setdefault(rule.target, []).append(rule)
    return by_target


def evaluate_expression(minterms, states) -> int:
    """max over minterms of (min over the minterm's members)."""
    return max(min(states[name] for name in term) for term in minterms)


def step(states, rules_by_target, clamped) -> dict[str, int]:
    """One synchronous round; reads only the previous state vector.

    next(x) = min(intrinsic, hard evaluations, soft evaluations floored at 1)
    where intrinsic is 0 for clamped entities and the current state otherwise.
    """
    nxt = {}
    for entity, current in states.items():
        value = FAILED if entity in clamped else current
        for rule in rules_by_target.get(entity, ()):
            evaluated = evaluate_expression(rule.minterms, states)
            if rule.kind == "soft":
                evaluated = max(evaluated, DEGRADED)
            value = min(value, evaluated)
        nxt[entity] = value
    return nxt


@dataclass
class CascadeTrace:
    rounds: list[dict[str, int]]
    changed: list[list[str]]  # changed[k] lists entities that changed at round k (k >= 1)
    clamp: frozenset

    @property
    def depth(self) -> int:
        last = 0
        for k, entities in enumerate(self.changed):
            if entities:
                last = k
        return last

    @property
    def final(self) -> dict[str, int]:
        return self.rounds[-1]


def cascade(entity_ids, rules, clamp) -> CascadeTrace:
    """Propagate clamped failures synchronously until no state changes.

    Round 0 is the post-clamp initial vector. The trace always ends with two
    identical rounds (the fixed-point witness). Monotone descent bounds the
    round count by 2 * |entities|; exceeding it signals an engine bug.
    """
    ids = list(entity_ids)
    clamp = frozenset(clamp)
    unknown = sorted(clamp - set(ids))
    if unknown:
        raise RuleLinkError(f"clamp set references unknown entities {unknown}")
    by_target = link_rules(rules, ids)

    states = {e: FAILED if e in clamp else OPERATIONAL for e in ids}
    rounds = [dict(states)]
    changed: list[list[str]] = [[]]
    limit = 2 * len(ids) + 1
    for _ in range(limit):
        nxt = step(states, by_target, clamp)
        moved = sorted(e for e in ids if nxt[e] != states[e])
        rounds.append(nxt)
        changed.append(moved)
        states = nxt
        if not moved:
            return CascadeTrace(rounds, changed, clamp)
    raise RuntimeError(
        f"cascade exceeded {limit} rounds; monotone descent should forbid this"
    )


def trace_to_json(trace: CascadeTrace) -> str:
    payload = [
        {entity: state for entity, state in sorted(round_states.items())}
        for round_states in trace.rounds
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
