"""Graphical imitability: pi-backdoor search, per-context checks, policy assembly."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional

from .errors import ResourceLimitError
from .ldag import (Ldag, PartialAssignment, context_induced_subgraph, context_variables,
                   d_separated, mutilate)
from .policy import ConditionalLookup, PolicyTable
from .scm import JointTable

DEFAULT_CONTEXT_CAP = 2 ** 20


class Decision(str, Enum):
    IMITABLE = "Imitable"
    NOT_IMITABLE = "NotImitable"
    UNKNOWN = "Unknown"

    @property
    def exit_code(self) -> int:
        return {"Imitable": 0, "NotImitable": 2, "Unknown": 3}[self.value]


@dataclass
class ContextResult:
    """Outcome for one context.

    ``kind`` is ``separator``, ``surrogate``, ``vacuous``, ``split`` or ``failure``.
    """

    context: PartialAssignment
    kind: str
    separator: Optional[FrozenSet[str]] = None
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.kind != "failure"

    def to_dict(self, g: Optional[Ldag] = None) -> dict:
        sort = g.sort if g is not None else sorted
        out = {"context": self.context.to_dict(), "kind": self.kind}
        if self.separator is not None:
            out["separator"] = list(sort(self.separator))
        out.update(self.detail)
        return out


@dataclass
class ImitabilityVerdict:
    decision: Decision
    policy: Optional[PolicyTable] = None
    witness: Optional[PartialAssignment] = None
    per_context: Dict[PartialAssignment, ContextResult] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.decision == Decision.NOT_IMITABLE and self.witness is None:
            raise ValueError("NotImitable verdict needs a witness context")

    @property
    def separator(self) -> Optional[FrozenSet[str]]:
        """Separator of the single empty context, when that is all there is."""
        r = self.per_context.get(PartialAssignment())
        return r.separator if r is not None else None

    def to_dict(self, g: Optional[Ldag] = None) -> dict:
        return {
            "decision": self.decision.value,
            "policy": self.policy.to_dict() if self.policy is not None else None,
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "per_context": [r.to_dict(g) for r in self.per_context.values()],
            "notes": list(self.notes),
        }


def find_sep(g: Ldag, x: Optional[str] = None, y: Optional[str] = None,
             c: Iterable[str] = ()) -> Optional[FrozenSet[str]]:
    """Canonical pi-backdoor set ``An({x, y} | c) & policy_scope``, if it works.

    The set is returned when it separates ``x`` from ``y`` once the edges out
    of ``x`` are cut; labels are ignored.  If this set fails, no subset of the
    policy scope works.
    """
    x = x or g.action
    y = y or g.reward
    c = set(c)
    z = (g.ancestors({x, y} | c) & set(g.policy_scope)) - {x, y}
    if d_separated(mutilate(g, (), {x}), {x}, {y}, z):
        return frozenset(z)
    return None


def reward_unaffected(g: Ldag) -> bool:
    return g.reward not in g.descendants([g.action])


def _trivial(g: Ldag) -> ImitabilityVerdict:
    return ImitabilityVerdict(
        Decision.IMITABLE, PolicyTable.uniform(g), per_context={},
        notes=["reward is not a descendant of the action; every policy imitates"])


def classic_imitable(g: Ldag, obs: Optional[JointTable] = None) -> ImitabilityVerdict:
    """Decision for an unlabeled graph via the canonical pi-backdoor set."""
    if g.has_labels:
        raise ValueError("graph carries labels; use imitate_graphical")
    if reward_unaffected(g):
        return _trivial(g)
    z = find_sep(g)
    empty = PartialAssignment()
    if z is None:
        return ImitabilityVerdict(Decision.NOT_IMITABLE, witness=empty,
                                  per_context={empty: ContextResult(empty, "failure")})
    policy = _policy_from_groups(g, obs, {empty: (z, ())}, ()) if obs is not None else None
    notes = [] if obs is not None else ["graph-only mode: policy is P(x | separator) from data"]
    return ImitabilityVerdict(Decision.IMITABLE, policy,
                              per_context={empty: ContextResult(empty, "separator", z)}, notes=notes)


def enumerate_contexts(g: Ldag, names: Iterable[str], cap: int = DEFAULT_CONTEXT_CAP):
    names = g.sort(names)
    size = math.prod(len(g.domain(n)) for n in names)
    if size > cap:
        raise ResourceLimitError(f"{size} contexts exceed cap {cap}")
    return list(g.assignments(names))


def check_all_contexts(g: Ldag, cap: int = DEFAULT_CONTEXT_CAP,
                       threads: int = 1) -> Dict[PartialAssignment, Optional[FrozenSet[str]]]:
    """Run :func:`find_sep` on the context-induced subgraph of every full context.

    Success everywhere is necessary for imitability, and sufficient when
    the context variables have no parents outside themselves.
    """
    contexts = enumerate_contexts(g, context_variables(g), cap)

    def one(c):
        return find_sep(context_induced_subgraph(g, c))

    if threads > 1 and len(contexts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, contexts))
    else:
        results = [one(c) for c in contexts]
    return dict(zip(contexts, results))


def parents_closed(g: Ldag, names: Iterable[str]) -> bool:
    names = set(names)
    return all(set(g.parents(n)) <= names for n in names)


def imitate_graphical(g: Ldag, obs: Optional[JointTable] = None,
                      cap: int = DEFAULT_CONTEXT_CAP, threads: int = 1) -> ImitabilityVerdict:
    """Decide imitability from the graph and assemble the per-context policy.

    Each context ``c`` gets pi_c(x | pa) = P(x | Z_c, c); the final policy
    switches on the context variables.  Without ``obs`` only the decision
    and the per-context separators are produced.
    """
    if not g.has_labels:
        return classic_imitable(g, obs)
    if reward_unaffected(g):
        return _trivial(g)
    cvars = context_variables(g)
    seps = check_all_contexts(g, cap, threads)
    per = {c: ContextResult(c, "separator", z) if z is not None else ContextResult(c, "failure")
           for c, z in seps.items()}
    failed = [c for c, z in seps.items() if z is None]
    if failed:
        return ImitabilityVerdict(Decision.NOT_IMITABLE, witness=failed[0], per_context=per)
    if g.action in cvars or g.reward in cvars:
        return ImitabilityVerdict(Decision.UNKNOWN, per_context=per,
                                  notes=["action or reward appears in a label"])
    if not parents_closed(g, cvars):
        return ImitabilityVerdict(
            Decision.UNKNOWN, per_context=per,
            notes=["all contexts pass, but context variables have parents outside the context set"])

    readable = g.sort(cvars & set(g.policy_scope))
    hidden = cvars - set(readable)
    groups: Dict[PartialAssignment, list] = {}
    for c in seps:
        groups.setdefault(c.restrict(readable), []).append(c)
    plan = {}
    for key, members in groups.items():
        zg = frozenset().union(*(seps[c] for c in members))
        for c in members:
            sub = mutilate(context_induced_subgraph(g, c), (), {g.action})
            if not d_separated(sub, {g.action}, {g.reward}, zg):
                return ImitabilityVerdict(
                    Decision.UNKNOWN, per_context=per,
                    notes=[f"pooled separator fails for context {c!r} with hidden context variables"])
        if hidden and not d_separated(g, {g.action}, hidden, zg | set(readable)):
            return ImitabilityVerdict(
                Decision.UNKNOWN, per_context=per,
                notes=["action depends on context variables the policy cannot read"])
        plan[key] = (zg, readable)
    notes = []
    if hidden:
        notes.append("context variables outside the policy scope were pooled: "
                     + ", ".join(g.sort(hidden)))
    if obs is None:
        notes.append("graph-only mode: per-context separators returned without a policy table")
        return ImitabilityVerdict(Decision.IMITABLE, None, per_context=per, notes=notes)
    return ImitabilityVerdict(Decision.IMITABLE, _policy_from_groups(g, obs, plan, readable),
                              per_context=per, notes=notes)


def _policy_from_groups(g: Ldag, obs: JointTable, plan, readable) -> PolicyTable:
    """pi(x | pa) = P(x | pa restricted to Z_key, key) with key = pa on ``readable``."""
    scope = set(readable)
    for zg, _ in plan.values():
        scope |= zg
    looks = {key: (zg, ConditionalLookup(obs, g.action, set(zg) | set(readable)))
             for key, (zg, _) in plan.items()}

    def rule(pa):
        zg, look = looks[pa.restrict(readable)]
        return look.get(pa.restrict(set(zg) | set(readable)))

    return PolicyTable.from_rule(g, scope, rule)
