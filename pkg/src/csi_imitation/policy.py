"""Stochastic policy tables and conditional-distribution helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ZeroMassContext
from .ldag import Ldag, PartialAssignment, parse_assignment_key
from .scm import JointTable

ROW_TOL = 1e-9


@dataclass(frozen=True)
class PolicyTable:
    """``table[scope indices..., action index]`` = pi(x | scope values).

    ``flags`` holds keys of rows that were filled with the uniform
    distribution because the conditioning event has zero mass.
    """

    action: str
    scope: Tuple[str, ...]
    scope_domains: Tuple[Tuple[str, ...], ...]
    action_domain: Tuple[str, ...]
    table: np.ndarray
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "table", np.asarray(self.table, dtype=float))
        want = tuple(len(d) for d in self.scope_domains) + (len(self.action_domain),)
        if self.table.shape != want:
            raise ValueError(f"policy table shape {self.table.shape}, expected {want}")
        if np.any(self.table < -ROW_TOL):
            raise ValueError("policy has negative entries")
        if np.any(np.abs(self.table.sum(axis=-1) - 1.0) > ROW_TOL):
            raise ValueError("policy rows do not sum to 1")

    def row(self, values: Mapping[str, str]) -> np.ndarray:
        idx = tuple(d.index(values[n]) for n, d in zip(self.scope, self.scope_domains))
        return self.table[idx]

    def rows(self):
        """Yield ``(assignment, distribution)`` pairs in lexicographic order."""
        for idx in np.ndindex(*[len(d) for d in self.scope_domains]):
            pa = PartialAssignment({n: d[i] for n, d, i in zip(self.scope, self.scope_domains, idx)})
            yield pa, self.table[idx]

    def to_dict(self) -> dict:
        out = {
            "action": self.action,
            "scope": list(self.scope),
            "rows": {pa.key(self.scope): [float(v) for v in dist] for pa, dist in self.rows()},
        }
        if self.flags:
            out["uniform_rows"] = list(self.flags)
        return out

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Mapping, graph: Ldag) -> "PolicyTable":
        scope = tuple(data["scope"])
        action = data.get("action", graph.action)
        shape = tuple(len(graph.domain(n)) for n in scope) + (len(graph.domain(action)),)
        table = np.full(shape, np.nan)
        for key, dist in data["rows"].items():
            pa = parse_assignment_key(key)
            table[tuple(graph.domain(n).index(pa[n]) for n in scope)] = dist
        if np.isnan(table).any():
            raise ValueError("policy is missing rows")
        return cls(action, scope, tuple(graph.domain(n) for n in scope), graph.domain(action),
                   table, tuple(data.get("uniform_rows", ())))

    @classmethod
    def uniform(cls, g: Ldag, scope: Sequence[str] = ()) -> "PolicyTable":
        scope = g.sort(scope)
        shape = tuple(len(g.domain(n)) for n in scope) + (len(g.domain(g.action)),)
        return cls(g.action, scope, tuple(g.domain(n) for n in scope), g.domain(g.action),
                   np.full(shape, 1.0 / shape[-1]))

    @classmethod
    def from_rule(cls, g: Ldag, scope: Sequence[str],
                  rule: Callable[[PartialAssignment], Optional[np.ndarray]]) -> "PolicyTable":
        """Build a table row by row; ``rule`` returning None yields a flagged uniform row."""
        scope = g.sort(scope)
        doms = tuple(g.domain(n) for n in scope)
        k = len(g.domain(g.action))
        table = np.empty(tuple(len(d) for d in doms) + (k,))
        flags = []
        for idx in np.ndindex(*[len(d) for d in doms]):
            pa = PartialAssignment({n: d[i] for n, d, i in zip(scope, doms, idx)})
            dist = rule(pa)
            if dist is None:
                dist = np.full(k, 1.0 / k)
                flags.append(pa.key(scope))
            table[idx] = dist
        return cls(g.action, scope, doms, g.domain(g.action), table, tuple(flags))


class ConditionalLookup:
    """P(target | given) read off a joint table, precomputed once.

    ``get(assignment)`` returns the conditional vector or None when the
    conditioning event has zero mass.
    """

    def __init__(self, obs: JointTable, target: str, given: Iterable[str]):
        given = [n for n in obs.scope if n in set(given) and n != target]
        sub = obs.marginal(given + [target]).reorder(given + [target])
        self.target = target
        self.given = tuple(given)
        self.domains = sub.domains[:-1]
        mass = sub.probs.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.cond = np.where(mass > 0, sub.probs / np.where(mass > 0, mass, 1.0), np.nan)
        self.mass = mass[..., 0]

    def get(self, values: Mapping[str, str]) -> Optional[np.ndarray]:
        idx = tuple(d.index(values[n]) for n, d in zip(self.given, self.domains))
        if self.mass[idx] <= 0:
            return None
        return self.cond[idx]

    def require(self, values: Mapping[str, str]) -> np.ndarray:
        out = self.get(values)
        if out is None:
            raise ZeroMassContext(PartialAssignment(values).restrict(self.given))
        return out


def conditional_policy(g: Ldag, obs: JointTable, given: Iterable[str],
                       fixed: Optional[Mapping[str, str]] = None) -> PolicyTable:
    """pi(x | given) = P(x | given, fixed) read from ``obs``."""
    fixed = PartialAssignment(fixed or {})
    given = g.sort(set(given) - set(fixed))
    look = ConditionalLookup(obs, g.action, set(given) | set(fixed))
    return PolicyTable.from_rule(g, given, lambda pa: look.get(pa.union(fixed)))
