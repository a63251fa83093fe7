"""Labeled DAGs: representation, context operations and d-separation.

A labeled edge ``A -> B`` carries a set of partial assignments over the other
parents of ``B``.  Under any of those assignments ``B`` does not depend on
``A``, so the edge can be treated as absent.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import GraphFormatError

ROLES = ("action", "reward", "plain")


class PartialAssignment(Mapping[str, str]):
    """Immutable map from variable names to domain values.

    Values are stored as strings.  Instances hash by content so they can be
    used as dictionary keys (contexts, labels).
    """

    __slots__ = ("_items", "_hash")

    def __init__(self, bindings: Optional[Mapping[str, object]] = None, **kwargs):
        items = dict(bindings or {})
        items.update(kwargs)
        self._items: Dict[str, str] = {str(k): str(v) for k, v in items.items()}
        self._hash = None

    def __getitem__(self, key: str) -> str:
        return self._items[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._items.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, PartialAssignment):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._items == {str(k): str(v) for k, v in other.items()}
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self._items.items())
        return "{" + inner + "}"

    @property
    def vars(self) -> FrozenSet[str]:
        return frozenset(self._items)

    def restrict(self, names: Iterable[str]) -> "PartialAssignment":
        keep = set(names)
        return PartialAssignment({k: v for k, v in self._items.items() if k in keep})

    def drop(self, names: Iterable[str]) -> "PartialAssignment":
        gone = set(names)
        return PartialAssignment({k: v for k, v in self._items.items() if k not in gone})

    def compatible(self, other: Mapping[str, str]) -> bool:
        """True when both assignments agree on every shared variable."""
        return all(other[k] == v for k, v in self._items.items() if k in other)

    def extends(self, other: Mapping[str, str]) -> bool:
        """True when ``self`` binds every variable of ``other`` to the same value."""
        return all(k in self._items and self._items[k] == v for k, v in other.items())

    def union(self, other: Mapping[str, str]) -> "PartialAssignment":
        if not self.compatible(other):
            raise ValueError(f"conflicting assignments {self!r} and {dict(other)!r}")
        merged = dict(self._items)
        merged.update(other)
        return PartialAssignment(merged)

    def key(self, order: Sequence[str]) -> str:
        """Canonical ``A=0,B=1`` string in the given variable order."""
        return ",".join(f"{k}={self._items[k]}" for k in order if k in self._items)

    def to_dict(self) -> Dict[str, str]:
        return dict(self._items)


def parse_assignment_key(text: str) -> PartialAssignment:
    """Inverse of :meth:`PartialAssignment.key`."""
    text = text.strip()
    if not text:
        return PartialAssignment()
    out = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad assignment fragment {part!r}")
        out[name.strip()] = value.strip()
    return PartialAssignment(out)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    domain: Tuple[str, ...] = ("0", "1")
    observed: bool = True
    role: str = "plain"

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        if not self.name or not isinstance(self.name, str):
            raise GraphFormatError("variable name must be a non-empty string")
        if len(self.domain) < 2:
            raise GraphFormatError(f"domain of {self.name} needs at least two values")
        if len(set(self.domain)) != len(self.domain):
            raise GraphFormatError(f"domain of {self.name} has duplicate values")
        if self.role not in ROLES:
            raise GraphFormatError(f"unknown role {self.role!r} for {self.name}")


@dataclass(frozen=True)
class LabeledEdge:
    source: str
    target: str
    labels: Tuple[PartialAssignment, ...] = ()

    def __post_init__(self):
        uniq = []
        for lab in self.labels:
            lab = lab if isinstance(lab, PartialAssignment) else PartialAssignment(lab)
            if lab not in uniq:
                uniq.append(lab)
        object.__setattr__(self, "labels", tuple(uniq))

    def with_labels(self, labels) -> "LabeledEdge":
        return LabeledEdge(self.source, self.target, tuple(labels))


class Ldag:
    """Labeled DAG with one action, one reward and a policy scope.

    Parameters
    ----------
    variables : sequence of VariableDecl
        Declaration order fixes every iteration order in the package.
    edges : sequence of LabeledEdge
    policy_scope : sequence of str, optional
        Observed non-descendants of the action the policy may read.  Defaults
        to all of them.
    meta : dict, optional
        Free-form metadata carried through JSON round trips.
    """

    def __init__(self, variables: Sequence[VariableDecl], edges: Sequence[LabeledEdge],
                 policy_scope: Optional[Iterable[str]] = None, meta: Optional[dict] = None,
                 _validate: bool = True):
        self.variables: Tuple[VariableDecl, ...] = tuple(variables)
        self.edges: Tuple[LabeledEdge, ...] = tuple(edges)
        self.meta = dict(meta or {})
        self._decl = {v.name: v for v in self.variables}
        self.order = {v.name: i for i, v in enumerate(self.variables)}
        self.names: Tuple[str, ...] = tuple(v.name for v in self.variables)
        self._parents: Dict[str, List[str]] = {n: [] for n in self.names}
        self._children: Dict[str, List[str]] = {n: [] for n in self.names}
        self._edge_at: Dict[Tuple[str, str], LabeledEdge] = {}
        if _validate:
            self._check_variables()
        for k, e in enumerate(self.edges):
            if _validate:
                where = f"edges[{k}]"
                for end in (e.source, e.target):
                    if end not in self._decl:
                        raise GraphFormatError(f"unknown vertex {end!r}", where)
                if e.source == e.target:
                    raise GraphFormatError("self-loop", where)
                if (e.source, e.target) in self._edge_at:
                    raise GraphFormatError("duplicate edge", where)
            self._edge_at[(e.source, e.target)] = e
            self._parents[e.target].append(e.source)
            self._children[e.source].append(e.target)
        for n in self.names:
            self._parents[n].sort(key=self.order.__getitem__)
            self._children[n].sort(key=self.order.__getitem__)
        self.action = next((v.name for v in self.variables if v.role == "action"), None)
        self.reward = next((v.name for v in self.variables if v.role == "reward"), None)
        if _validate:
            self._check_acyclic()
            self._check_labels()
        if policy_scope is None:
            desc = self.descendants([self.action]) if self.action else set()
            policy_scope = [n for n in self.names if self._decl[n].observed and n not in desc]
        self.policy_scope: Tuple[str, ...] = self.sort(policy_scope)
        if _validate:
            self._check_scope()

    # -- validation -----------------------------------------------------
    def _check_variables(self):
        seen = set()
        for i, v in enumerate(self.variables):
            if v.name in seen:
                raise GraphFormatError(f"duplicate variable {v.name!r}", f"variables[{i}]")
            seen.add(v.name)
        actions = [v for v in self.variables if v.role == "action"]
        rewards = [v for v in self.variables if v.role == "reward"]
        if len(actions) != 1 or len(rewards) != 1:
            raise GraphFormatError("need exactly one action and exactly one reward variable")
        if not actions[0].observed:
            raise GraphFormatError(f"action {actions[0].name!r} must be observed")

    def _check_acyclic(self):
        if len(self.topological_order()) != len(self.names):
            raise GraphFormatError("graph has a directed cycle")

    def _check_labels(self):
        for k, e in enumerate(self.edges):
            allowed = set(self._parents[e.target]) - {e.source}
            for j, lab in enumerate(e.labels):
                where = f"edges[{k}].labels[{j}]"
                if not lab:
                    raise GraphFormatError("empty label", where)
                for name, value in lab.items():
                    if name not in allowed:
                        raise GraphFormatError(
                            f"label variable {name!r} is not another parent of {e.target!r}", where)
                    if value not in self._decl[name].domain:
                        raise GraphFormatError(f"value {value!r} outside domain of {name!r}", where)

    def _check_scope(self):
        desc = self.descendants([self.action])
        for name in self.policy_scope:
            if name not in self._decl:
                raise GraphFormatError(f"unknown policy_scope variable {name!r}", "policy_scope")
            if not self._decl[name].observed:
                raise GraphFormatError(f"policy_scope variable {name!r} is latent", "policy_scope")
            if name in desc:
                raise GraphFormatError(
                    f"policy_scope variable {name!r} is a descendant of the action", "policy_scope")

    # -- accessors ------------------------------------------------------
    def __repr__(self):
        return f"Ldag({len(self.names)} vertices, {len(self.edges)} edges)"

    def __eq__(self, other):
        if not isinstance(other, Ldag):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.to_json())

    def decl(self, name: str) -> VariableDecl:
        try:
            return self._decl[name]
        except KeyError:
            raise ValueError(f"unknown vertex {name!r}") from None

    def domain(self, name: str) -> Tuple[str, ...]:
        return self.decl(name).domain

    def parents(self, name: str) -> List[str]:
        return list(self._parents[self.decl(name).name])

    def children(self, name: str) -> List[str]:
        return list(self._children[self.decl(name).name])

    def edge(self, source: str, target: str) -> Optional[LabeledEdge]:
        return self._edge_at.get((source, target))

    def has_edge(self, source: str, target: str) -> bool:
        return (source, target) in self._edge_at

    @property
    def observed(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.observed)

    @property
    def latent(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables if not v.observed)

    @property
    def has_labels(self) -> bool:
        return any(e.labels for e in self.edges)

    def sort(self, names: Iterable[str]) -> Tuple[str, ...]:
        """Sort names by declaration order (unknown names raise)."""
        names = set(names)
        for n in names:
            if n not in self.order:
                raise ValueError(f"unknown vertex {n!r}")
        return tuple(sorted(names, key=self.order.__getitem__))

    def topological_order(self) -> List[str]:
        indeg = {n: len(self._parents[n]) for n in self.names}
        ready = [n for n in self.names if indeg[n] == 0]
        out = []
        while ready:
            # smallest declaration index first keeps the order deterministic
            ready.sort(key=self.order.__getitem__, reverse=True)
            n = ready.pop()
            out.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return out

    def ancestors(self, names: Iterable[str]) -> FrozenSet[str]:
        return _closure(self, names, self._parents)

    def descendants(self, names: Iterable[str]) -> FrozenSet[str]:
        return _closure(self, names, self._children)

    def assignments(self, names: Sequence[str]) -> Iterator[PartialAssignment]:
        """All joint assignments over ``names``, lexicographic in domain order."""
        names = list(names)
        doms = [self.domain(n) for n in names]
        for values in itertools.product(*doms):
            yield PartialAssignment(dict(zip(names, values)))

    def check_assignment(self, a: Mapping[str, str]):
        for name, value in a.items():
            if value not in self.domain(name):
                raise ValueError(f"value {value!r} outside domain of {name!r}")

    # -- derived graphs -------------------------------------------------
    def replace_edges(self, edges: Iterable[LabeledEdge]) -> "Ldag":
        """Same vertices and policy scope, new edge set (no re-validation)."""
        return Ldag(self.variables, tuple(edges), self.policy_scope, self.meta, _validate=False)

    def strip_labels(self) -> "Ldag":
        return self.replace_edges(e.with_labels(()) for e in self.edges)

    def with_policy_scope(self, scope: Iterable[str]) -> "Ldag":
        return Ldag(self.variables, self.edges, scope, self.meta)

    def with_policy_edges(self) -> "Ldag":
        """Add unlabeled edges from every policy-scope variable into the action."""
        extra = [LabeledEdge(p, self.action) for p in self.policy_scope
                 if not self.has_edge(p, self.action)]
        return self.replace_edges(list(self.edges) + extra)

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        out = {
            "variables": [
                {"name": v.name, "domain": list(v.domain), "observed": v.observed, "role": v.role}
                for v in self.variables
            ],
            "edges": [],
            "policy_scope": list(self.policy_scope),
        }
        for e in self.edges:
            labels = [{k: lab[k] for k in self.sort(lab)} for lab in e.labels]
            out["edges"].append({"from": e.source, "to": e.target, "labels": labels})
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Ldag":
        if not isinstance(data, Mapping):
            raise GraphFormatError("graph must be a JSON object")
        for key in ("variables", "edges"):
            if key not in data:
                raise GraphFormatError(f"missing key {key!r}")
        variables = []
        for i, v in enumerate(data["variables"]):
            where = f"variables[{i}]"
            if not isinstance(v, Mapping) or "name" not in v:
                raise GraphFormatError("variable needs a name", where)
            try:
                variables.append(VariableDecl(
                    name=v["name"],
                    domain=tuple(v.get("domain", ("0", "1"))),
                    observed=bool(v.get("observed", True)),
                    role=v.get("role", "plain"),
                ))
            except GraphFormatError as exc:
                raise GraphFormatError(str(exc), where) from None
        edges = []
        for i, e in enumerate(data["edges"]):
            where = f"edges[{i}]"
            if not isinstance(e, Mapping) or "from" not in e or "to" not in e:
                raise GraphFormatError("edge needs 'from' and 'to'", where)
            labels = e.get("labels", [])
            if not isinstance(labels, list) or not all(isinstance(x, Mapping) for x in labels):
                raise GraphFormatError("labels must be a list of objects", where)
            edges.append(LabeledEdge(e["from"], e["to"], tuple(PartialAssignment(x) for x in labels)))
        return cls(variables, edges, data.get("policy_scope"), data.get("meta"))

    @classmethod
    def from_json(cls, text: str) -> "Ldag":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
        return cls.from_dict(data)


def build_ldag(variables, edges, policy_scope=None, latent=(), action="X", reward="Y",
               domains=None, meta=None) -> Ldag:
    """Compact constructor used by fixtures and generators.

    ``variables`` lists names; ``edges`` holds ``(a, b)`` or ``(a, b, labels)``
    tuples where labels are dicts.
    """
    domains = domains or {}
    decls = []
    for name in variables:
        role = "action" if name == action else "reward" if name == reward else "plain"
        decls.append(VariableDecl(name, tuple(domains.get(name, ("0", "1"))),
                                  observed=name not in latent, role=role))
    out = []
    for e in edges:
        labels = e[2] if len(e) > 2 else ()
        out.append(LabeledEdge(e[0], e[1], tuple(PartialAssignment(l) for l in labels)))
    return Ldag(decls, out, policy_scope, meta)


def _closure(g: Ldag, names, nbrs) -> FrozenSet[str]:
    seen = set()
    stack = []
    for n in names:
        g.decl(n)
        if n not in seen:
            seen.add(n)
            stack.append(n)
    while stack:
        for m in nbrs[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return frozenset(seen)


def ancestors(g: Ldag, s: Iterable[str]) -> FrozenSet[str]:
    return g.ancestors(s)


def descendants(g: Ldag, s: Iterable[str]) -> FrozenSet[str]:
    return g.descendants(s)


# -- context operations -------------------------------------------------

def context_variables(g: Ldag) -> FrozenSet[str]:
    """Variables bound by at least one edge label."""
    out = set()
    for e in g.edges:
        for lab in e.labels:
            out.update(lab)
    return frozenset(out)


def label_implied(label: PartialAssignment, w: Mapping[str, str]) -> bool:
    """The edge carrying ``label`` is absent under ``w``."""
    return all(k in w and w[k] == v for k, v in label.items())


def _check_context(g: Ldag, w: Mapping[str, str]):
    cvars = context_variables(g)
    for name, value in w.items():
        if name not in cvars:
            raise ValueError(f"{name!r} is not a context variable")
        if value not in g.domain(name):
            raise ValueError(f"value {value!r} outside domain of {name!r}")


def _specialize(g: Ldag, w: Mapping[str, str], drop_incident: bool) -> Ldag:
    bound = set(w)
    kept = []
    for e in g.edges:
        if drop_incident and (e.source in bound or e.target in bound):
            continue
        if any(label_implied(lab, w) for lab in e.labels):
            continue
        kept.append(e.with_labels(lab for lab in e.labels if lab.compatible(w)))
    return g.replace_edges(kept)


def context_induced_subgraph(g: Ldag, w: Mapping[str, str]) -> Ldag:
    """Subgraph for context ``w``.

    Incompatible labels are dropped, edges whose label is implied by ``w`` are
    removed, and every edge touching a variable of ``w`` is removed.
    """
    w = PartialAssignment(w)
    _check_context(g, w)
    return _specialize(g, w, drop_incident=True)


def context_specific_dag(g: Ldag, c: Mapping[str, str]) -> Ldag:
    """Remove only the edges that are absent under ``c``; context edges stay."""
    c = PartialAssignment(c)
    _check_context(g, c)
    return _specialize(g, c, drop_incident=False)


def mutilate(g: Ldag, remove_into: Iterable[str] = (), remove_outof: Iterable[str] = ()) -> Ldag:
    into = set(remove_into)
    outof = set(remove_outof)
    for n in into | outof:
        g.decl(n)
    return g.replace_edges(e for e in g.edges if e.target not in into and e.source not in outof)


# -- separation ---------------------------------------------------------

def d_separated(g: Ldag, x_set: Iterable[str], y_set: Iterable[str], z_set: Iterable[str]) -> bool:
    """Bayes-ball reachability test of ``X _||_ Y | Z``; labels are ignored."""
    xs, ys, zs = set(x_set), set(y_set), set(z_set)
    for n in xs | ys | zs:
        g.decl(n)
    if xs & ys or xs & zs or ys & zs:
        raise ValueError("x, y and z sets must be pairwise disjoint")
    if not xs or not ys:
        return True
    z_anc = g.ancestors(zs)
    parents, children = g._parents, g._children
    # (vertex, came_from_child)
    stack = [(x, True) for x in xs]
    visited = set()
    while stack:
        v, up = stack.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v in ys:
            return False
        if up:
            if v in zs:
                continue
            stack.extend((p, True) for p in parents[v])
            stack.extend((c, False) for c in children[v])
        else:
            if v not in zs:
                stack.extend((c, False) for c in children[v])
            if v in z_anc:
                stack.extend((p, True) for p in parents[v])
    return True


def _moral_adjacency(g: Ldag, keep: FrozenSet[str]) -> Dict[str, set]:
    adj = {n: set() for n in keep}
    for n in keep:
        pas = [p for p in g._parents[n] if p in keep]
        for p in pas:
            adj[n].add(p)
            adj[p].add(n)
        for a, b in itertools.combinations(pas, 2):
            adj[a].add(b)
            adj[b].add(a)
    return adj


def _reach_blockers(adj: Dict[str, set], start: str, blockers: set) -> set:
    """Members of ``blockers`` reachable from ``start`` without passing through one."""
    hit = set()
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w in seen:
                continue
            seen.add(w)
            if w in blockers:
                hit.add(w)
            else:
                queue.append(w)
    return hit


def find_min_sep(g: Ldag, x: str, y: str, required: Iterable[str] = (),
                 allowed: Optional[Iterable[str]] = None) -> Optional[FrozenSet[str]]:
    """Minimal d-separator ``Z`` with ``required <= Z <= allowed``, or None.

    Works in the moral graph of the ancestral set of ``{x, y} | required``:
    start from every allowed vertex there, keep only those adjacent to the
    ``x`` side, then only those adjacent to the ``y`` side.
    """
    required = set(required)
    allowed = set(g.names) - {x, y} if allowed is None else set(allowed)
    for n in required | allowed | {x, y}:
        g.decl(n)
    if x == y:
        raise ValueError("x and y must differ")
    if x in allowed or y in allowed:
        raise ValueError("allowed set must exclude x and y")
    if not required <= allowed:
        raise ValueError("required must be a subset of allowed")
    anc = g.ancestors({x, y} | required)
    adj = _moral_adjacency(g, anc)
    z0 = (allowed & anc) | required
    if y in _reach_all(adj, x, z0):
        return None
    z1 = _reach_blockers(adj, x, z0) | required
    z2 = _reach_blockers(adj, y, z1) | required
    return frozenset(z2)


def _reach_all(adj, start, blockers) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen and w not in blockers:
                seen.add(w)
                queue.append(w)
    return seen


def minimal_separators(g: Ldag, x: str, y: str, required: Iterable[str] = (),
                       allowed: Optional[Iterable[str]] = None, limit: int = 8,
                       max_candidates: int = 12) -> List[FrozenSet[str]]:
    """Up to ``limit`` minimal separators, canonical one first.

    Alternates come from a size-ordered subset scan restricted to the
    ancestral set; skipped when that set has more than ``max_candidates``
    free vertices.
    """
    first = find_min_sep(g, x, y, required, allowed)
    if first is None:
        return []
    out = [first]
    required = set(required)
    allowed = set(g.names) - {x, y} if allowed is None else set(allowed)
    anc = g.ancestors({x, y} | required)
    free = list(g.sort((allowed & anc) - required))
    if len(free) > max_candidates:
        return out
    for size in range(len(free) + 1):
        for extra in itertools.combinations(free, size):
            if len(out) >= limit:
                return out
            z = frozenset(required | set(extra))
            if z in out or any(s <= z for s in out):
                continue
            if d_separated(g, {x}, {y}, z):
                out.append(z)
    return out
