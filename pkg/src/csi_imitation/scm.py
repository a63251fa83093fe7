"""Exact discrete SCM engine: joint tables, interventions, sampling, metrics.

Every variable, latent or not, carries a conditional probability table over
its graph parents.  Exogenous noise is folded into row stochasticity.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import AbsoluteContinuityError, GraphFormatError, ResourceLimitError, ZeroMassContext
from .ldag import Ldag, PartialAssignment, parse_assignment_key

DEFAULT_STATE_CAP = 2 ** 22
ROW_TOL = 1e-12


@dataclass(frozen=True)
class JointTable:
    """Dense table over the product of the scope's domains.

    ``probs`` has one axis per scope variable.  ``sample_size`` is set when
    the table is an empirical estimate.
    """

    scope: Tuple[str, ...]
    domains: Tuple[Tuple[str, ...], ...]
    probs: np.ndarray
    sample_size: Optional[int] = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        shape = tuple(len(d) for d in self.domains)
        if len(self.scope) != len(self.domains):
            raise ValueError("scope and domains differ in length")
        if probs.shape != shape:
            raise ValueError(f"table shape {probs.shape} does not match domains {shape}")
        if np.any(probs < 0):
            raise ValueError("negative probability")
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "probs", probs)

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def domain(self, name: str) -> Tuple[str, ...]:
        return self.domains[self.scope.index(name)]

    def index(self, name: str, value: str) -> int:
        try:
            return self.domain(name).index(value)
        except ValueError:
            raise ValueError(f"value {value!r} outside domain of {name!r}") from None

    def marginal(self, names: Iterable[str]) -> "JointTable":
        """Sum out everything but ``names``; keeps the table's own axis order."""
        names = set(names)
        missing = names - set(self.scope)
        if missing:
            raise ValueError(f"variables {sorted(missing)} not in scope")
        drop = tuple(i for i, n in enumerate(self.scope) if n not in names)
        keep = [i for i, n in enumerate(self.scope) if n in names]
        probs = self.probs.sum(axis=drop) if drop else self.probs
        return JointTable(tuple(self.scope[i] for i in keep),
                          tuple(self.domains[i] for i in keep), probs, self.sample_size)

    def slice(self, on: Mapping[str, str]) -> "JointTable":
        """Restrict to rows matching ``on`` without renormalizing."""
        index = []
        keep = []
        for i, n in enumerate(self.scope):
            if n in on:
                index.append(self.index(n, on[n]))
            else:
                index.append(slice(None))
                keep.append(i)
        missing = set(on) - set(self.scope)
        if missing:
            raise ValueError(f"variables {sorted(missing)} not in scope")
        return JointTable(tuple(self.scope[i] for i in keep),
                          tuple(self.domains[i] for i in keep),
                          self.probs[tuple(index)], self.sample_size)

    def condition(self, on: Mapping[str, str]) -> "JointTable":
        part = self.slice(on)
        mass = part.total
        if mass <= 0:
            raise ZeroMassContext(PartialAssignment(on))
        return JointTable(part.scope, part.domains, part.probs / mass, self.sample_size)

    def prob(self, event: Mapping[str, str]) -> float:
        return self.marginal(event.keys()).slice(event).total

    def reorder(self, scope: Sequence[str]) -> "JointTable":
        scope = tuple(scope)
        if sorted(scope) != sorted(self.scope):
            raise ValueError("reorder needs a permutation of the scope")
        perm = [self.scope.index(n) for n in scope]
        return JointTable(scope, tuple(self.domains[i] for i in perm),
                          np.transpose(self.probs, perm), self.sample_size)

    def vector(self) -> np.ndarray:
        return self.probs.reshape(-1)

    def to_dict(self) -> dict:
        rows = {}
        for idx in np.ndindex(self.probs.shape):
            key = ",".join(f"{n}={self.domains[i][k]}" for i, (n, k) in enumerate(zip(self.scope, idx)))
            rows[key] = float(self.probs[idx])
        return {"scope": list(self.scope), "probs": rows}


def marginal(t: JointTable, names: Iterable[str]) -> JointTable:
    return t.marginal(names)


def condition(t: JointTable, on: Mapping[str, str]) -> JointTable:
    return t.condition(on)


@dataclass(frozen=True)
class Cpt:
    """``table[parent indices..., child index]``."""

    child: str
    parents: Tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "table", np.asarray(self.table, dtype=float))
        if self.table.ndim != len(self.parents) + 1:
            raise ValueError(f"CPT of {self.child} has wrong rank")
        if np.any(self.table < 0):
            raise ValueError(f"CPT of {self.child} has negative entries")
        sums = self.table.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > ROW_TOL):
            raise ValueError(f"CPT rows of {self.child} do not sum to 1")

    def row(self, assignment: Mapping[str, str], g: Ldag) -> np.ndarray:
        idx = tuple(g.domain(p).index(assignment[p]) for p in self.parents)
        return self.table[idx]


class DiscreteScm:
    """CPT-parameterized model compatible with an :class:`Ldag`.

    ``flags`` lists CPT rows that were filled by default rather than given.
    """

    def __init__(self, graph: Ldag, cpts: Mapping[str, Cpt], flags: Sequence[str] = ()):
        self.graph = graph
        self.flags = tuple(flags)
        self.cpts: Dict[str, Cpt] = {}
        for name in graph.names:
            if name not in cpts:
                raise GraphFormatError(f"missing CPT for {name!r}", f"cpts.{name}")
            cpt = cpts[name]
            if set(cpt.parents) != set(graph.parents(name)):
                raise GraphFormatError(
                    f"CPT parents {list(cpt.parents)} differ from graph parents {graph.parents(name)}",
                    f"cpts.{name}")
            want = tuple(len(graph.domain(p)) for p in cpt.parents) + (len(graph.domain(name)),)
            if cpt.table.shape != want:
                raise GraphFormatError(f"CPT shape {cpt.table.shape} expected {want}", f"cpts.{name}")
            self.cpts[name] = cpt
        extra = set(cpts) - set(graph.names)
        if extra:
            raise GraphFormatError(f"CPTs for unknown variables {sorted(extra)}", "cpts")

    def factors(self) -> List[Tuple[Tuple[str, ...], np.ndarray]]:
        return [(c.parents + (c.child,), c.table) for c in (self.cpts[n] for n in self.graph.names)]

    # -- json ----------------------------------------------------------
    def to_dict(self) -> dict:
        g = self.graph
        cpts = {}
        for name in g.names:
            cpt = self.cpts[name]
            rows = {}
            for pa in g.assignments(cpt.parents):
                rows[pa.key(cpt.parents)] = [float(v) for v in cpt.row(pa, g)]
            cpts[name] = {"parents": list(cpt.parents), "rows": rows}
        out = {"graph": g.to_dict(), "cpts": cpts}
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Mapping, graph: Optional[Ldag] = None) -> "DiscreteScm":
        if graph is None:
            if "graph" not in data:
                raise GraphFormatError("missing key 'graph'")
            graph = Ldag.from_dict(data["graph"])
        if "cpts" not in data or not isinstance(data["cpts"], Mapping):
            raise GraphFormatError("missing object 'cpts'")
        cpts = {}
        for name, spec in data["cpts"].items():
            where = f"cpts.{name}"
            if name not in graph.order:
                raise GraphFormatError(f"unknown variable {name!r}", where)
            parents = tuple(spec.get("parents", graph.parents(name)))
            shape = tuple(len(graph.domain(p)) for p in parents) + (len(graph.domain(name)),)
            table = np.full(shape, np.nan)
            for key, row in spec.get("rows", {}).items():
                try:
                    pa = parse_assignment_key(key)
                    idx = tuple(graph.domain(p).index(pa[p]) for p in parents)
                except (ValueError, KeyError):
                    raise GraphFormatError(f"bad row key {key!r}", where) from None
                if len(row) != shape[-1]:
                    raise GraphFormatError(f"row {key!r} has {len(row)} entries, expected {shape[-1]}", where)
                table[idx] = row
            if np.isnan(table).any():
                raise GraphFormatError("missing CPT rows", where)
            try:
                cpts[name] = Cpt(name, parents, table)
            except ValueError as exc:
                raise GraphFormatError(str(exc), where) from None
        return cls(graph, cpts, data.get("flags", ()))

    @classmethod
    def from_json(cls, text: str, graph: Optional[Ldag] = None) -> "DiscreteScm":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
        return cls.from_dict(data, graph)


# -- exact inference ----------------------------------------------------

def _product(names: Sequence[str], domains: Sequence[Sequence[str]],
             factors: Iterable[Tuple[Sequence[str], np.ndarray]], cap: int) -> np.ndarray:
    shape = tuple(len(d) for d in domains)
    size = math.prod(shape)
    if size > cap:
        raise ResourceLimitError(f"joint space of {size} states exceeds cap {cap}")
    pos = {n: i for i, n in enumerate(names)}
    out = np.ones(shape)
    for axes, arr in factors:
        # move factor axes into global order, then broadcast
        order = sorted(range(len(axes)), key=lambda k: pos[axes[k]])
        arr = np.transpose(arr, order)
        view = [1] * len(names)
        for k in order:
            view[pos[axes[k]]] = shape[pos[axes[k]]]
        out = out * arr.reshape(view)
    return out


def joint_distribution(m: DiscreteScm, cap: int = DEFAULT_STATE_CAP) -> JointTable:
    g = m.graph
    domains = tuple(g.domain(n) for n in g.names)
    return JointTable(g.names, domains, _product(g.names, domains, m.factors(), cap))


def observational(m: DiscreteScm, cap: int = DEFAULT_STATE_CAP) -> JointTable:
    """P(O): the joint marginalized to observed variables."""
    return joint_distribution(m, cap).marginal(m.graph.observed)


def interventional(m: DiscreteScm, do_policy, cap: int = DEFAULT_STATE_CAP) -> JointTable:
    """Joint over all variables after ``do(x)`` or after running a policy.

    ``do_policy`` is a :class:`PartialAssignment` (point intervention on any
    variables) or a :class:`~csi_imitation.policy.PolicyTable` replacing the
    action's mechanism.
    """
    from .policy import PolicyTable

    g = m.graph
    cpts = dict(m.cpts)
    if isinstance(do_policy, PolicyTable):
        pi = do_policy
        if pi.action != g.action:
            raise ValueError(f"policy acts on {pi.action!r}, graph action is {g.action!r}")
        if not set(pi.scope) <= set(g.policy_scope):
            raise ValueError(f"policy scope {list(pi.scope)} not within {list(g.policy_scope)}")
        if pi.action_domain != g.domain(g.action):
            raise ValueError("policy action domain differs from the graph")
        factors = [f for f in m.factors() if f[0][-1] != g.action]
        factors.append((pi.scope + (pi.action,), pi.table))
    else:
        do = PartialAssignment(do_policy)
        g.check_assignment(do)
        factors = []
        for name in g.names:
            if name in do:
                point = np.zeros(len(g.domain(name)))
                point[g.domain(name).index(do[name])] = 1.0
                factors.append(((name,), point))
            else:
                c = cpts[name]
                factors.append((c.parents + (c.child,), c.table))
    domains = tuple(g.domain(n) for n in g.names)
    return JointTable(g.names, domains, _product(g.names, domains, factors, cap))


def reward_distribution(m: DiscreteScm, policy=None, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """P(y), or P(y | do(policy)) when a policy is given, as a vector."""
    t = joint_distribution(m, cap) if policy is None else interventional(m, policy, cap)
    return t.marginal([m.graph.reward]).probs


# -- CSI validation -----------------------------------------------------

@dataclass(frozen=True)
class CsiViolation:
    source: str
    target: str
    label: PartialAssignment
    rows: Tuple[PartialAssignment, PartialAssignment]
    distance: float

    def to_dict(self) -> dict:
        return {"edge": [self.source, self.target], "label": self.label.to_dict(),
                "rows": [r.to_dict() for r in self.rows], "distance": self.distance}


@dataclass
class ValidationReport:
    violations: List[CsiViolation] = field(default_factory=list)
    skipped_edges: List[Tuple[str, str]] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations],
                "skipped_edges": [list(e) for e in self.skipped_edges], "flags": list(self.flags)}


def validate_csi(m: DiscreteScm, graph: Optional[Ldag] = None, tol: float = ROW_TOL) -> List[CsiViolation]:
    return check_csi(m, graph, tol).violations


def check_csi(m: DiscreteScm, graph: Optional[Ldag] = None, tol: float = ROW_TOL) -> ValidationReport:
    """Check every label of ``graph`` (default: the model's own) against the CPTs.

    For each edge ``A -> B`` and label ``l`` the rows of ``B``'s table that
    extend ``l`` and agree on the remaining parents must coincide across the
    values of ``A``.  One violation is reported per offending group, naming
    the farthest pair of rows.
    """
    g = m.graph
    graph = graph or g
    report = ValidationReport(flags=list(m.flags))
    for e in graph.edges:
        if not e.labels:
            continue
        if not g.has_edge(e.source, e.target):
            report.skipped_edges.append((e.source, e.target))
            continue
        cpt = m.cpts[e.target]
        for lab in e.labels:
            if not set(lab) <= set(cpt.parents):
                report.skipped_edges.append((e.source, e.target))
                continue
            others = [p for p in cpt.parents if p != e.source and p not in lab]
            for rest in g.assignments(others):
                rows = []
                for v in g.domain(e.source):
                    pa = rest.union(lab).union({e.source: v})
                    rows.append((pa, cpt.row(pa, g)))
                best = (0.0, None)
                for i in range(len(rows)):
                    for j in range(i + 1, len(rows)):
                        d = float(np.max(np.abs(rows[i][1] - rows[j][1])))
                        if d > best[0]:
                            best = (d, (rows[i][0], rows[j][0]))
                if best[0] > tol:
                    report.violations.append(CsiViolation(e.source, e.target, lab, best[1], best[0]))
    return report


# -- sampling -----------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Integer-coded samples; ``columns[name][i]`` indexes the domain of ``name``."""

    names: Tuple[str, ...]
    domains: Tuple[Tuple[str, ...], ...]
    columns: Dict[str, np.ndarray]

    def __len__(self):
        return len(self.columns[self.names[0]]) if self.names else 0

    def to_csv(self, fh=None) -> Optional[str]:
        buf = fh or io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        cols = [np.asarray(self.domains[i], dtype=object)[self.columns[n]] for i, n in enumerate(self.names)]
        for row in zip(*cols):
            w.writerow(row)
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text: str, graph: Ldag) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise GraphFormatError("empty CSV")
        names = tuple(rows[0])
        domains = tuple(graph.domain(n) for n in names)
        cols = {n: np.empty(len(rows) - 1, dtype=np.int64) for n in names}
        for r, row in enumerate(rows[1:], start=2):
            if len(row) != len(names):
                raise GraphFormatError("wrong number of fields", f"line {r}")
            for i, n in enumerate(names):
                try:
                    cols[n][r - 2] = domains[i].index(row[i])
                except ValueError:
                    raise GraphFormatError(f"value {row[i]!r} outside domain of {n!r}", f"line {r}") from None
        return cls(names, domains, cols)


def sample(m: DiscreteScm, n: int, seed: int, policy=None) -> Dataset:
    """Ancestral sampling in topological order with a private generator."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    g = m.graph
    cols: Dict[str, np.ndarray] = {}
    for name in g.topological_order():
        if policy is not None and name == g.action:
            parents, table = policy.scope, policy.table
        else:
            parents, table = m.cpts[name].parents, m.cpts[name].table
        rows = table[tuple(cols[p] for p in parents)] if parents else np.broadcast_to(table, (n, table.shape[-1]))
        cdf = np.cumsum(rows, axis=1)
        u = rng.random(n)
        draw = (u[:, None] >= cdf[:, :-1]).sum(axis=1) if rows.shape[1] > 1 else np.zeros(n, dtype=np.int64)
        cols[name] = draw.astype(np.int64)
    return Dataset(g.names, tuple(g.domain(x) for x in g.names), {k: cols[k] for k in g.names})


def estimate_joint(data: Dataset, names: Iterable[str], alpha: float = 0.0) -> JointTable:
    """Empirical frequencies over ``names`` with additive smoothing ``alpha``."""
    names = [n for n in data.names if n in set(names)]
    domains = tuple(data.domains[data.names.index(n)] for n in names)
    shape = tuple(len(d) for d in domains)
    counts = np.zeros(shape)
    if names:
        flat = np.ravel_multi_index(tuple(data.columns[n] for n in names), shape)
        counts = np.bincount(flat, minlength=math.prod(shape)).reshape(shape).astype(float)
    else:
        counts = np.asarray(float(len(data)))
    counts = counts + alpha
    return JointTable(tuple(names), domains, counts / counts.sum(), sample_size=len(data))


# -- metrics ------------------------------------------------------------

def _aligned(p: JointTable, q: JointTable) -> Tuple[np.ndarray, np.ndarray]:
    if set(p.scope) != set(q.scope):
        raise ValueError("tables have different scopes")
    q = q.reorder(p.scope)
    if q.domains != p.domains:
        raise ValueError("tables have different domains")
    return p.vector(), q.vector()


def kl_divergence(p, q) -> float:
    """Natural-log KL divergence; accepts JointTables or plain vectors."""
    if isinstance(p, JointTable):
        pv, qv = _aligned(p, q)
    else:
        pv, qv = np.asarray(p, dtype=float).ravel(), np.asarray(q, dtype=float).ravel()
        if pv.shape != qv.shape:
            raise ValueError("vectors differ in length")
    mask = pv > 0
    if np.any(qv[mask] <= 0):
        raise AbsoluteContinuityError("q vanishes where p is positive")
    return float(np.sum(pv[mask] * (np.log(pv[mask]) - np.log(qv[mask]))))


def expected_value(t: JointTable, numeric_map: Optional[Mapping[str, float]] = None) -> float:
    """Mean of a single-variable table; symbols map through ``numeric_map``."""
    if len(t.scope) != 1:
        raise ValueError("expected_value needs a single-variable table")
    dom = t.domains[0]
    vals = np.array([numeric_map[v] if numeric_map else float(v) for v in dom])
    return float(np.dot(t.probs, vals) / t.probs.sum())
