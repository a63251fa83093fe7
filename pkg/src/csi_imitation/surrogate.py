"""Data-assisted imitation through context-specific surrogates.

When no pi-backdoor set exists in a context, an observed set S that
separates the action from the reward (once the policy inputs point at the
action) can stand in for the reward: any policy reproducing P(S | c) also
reproduces P(y | c).  The policy is found by solving a linear system whose
coefficients are interventional quantities identified from P(O).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize

from .errors import ZeroMassContext
from .imitability import (ContextResult, Decision, ImitabilityVerdict, find_sep,
                          reward_unaffected)
from .ldag import (Ldag, PartialAssignment, context_specific_dag, context_variables,
                   d_separated, minimal_separators, mutilate)
from .policy import ConditionalLookup, PolicyTable
from .scm import JointTable

EXACT_TOL = 1e-8
# fraction of the residual tolerance spent on regularizing empirical solutions
SAMPLED_SLACK = 0.25


# -- surrogates ---------------------------------------------------------

def surrogate_candidates(g: Ldag, c: PartialAssignment, limit: int = 8) -> List[FrozenSet[str]]:
    """Minimal surrogate sets for context ``c``, canonical one first."""
    c = PartialAssignment(c)
    cvars = context_variables(g)
    for name in c:
        if name not in cvars or name not in g.policy_scope:
            raise ValueError(f"{name!r} is not a readable context variable")
    h = context_specific_dag(g, c).with_policy_edges()
    allowed = (set(g.observed) - {g.action, g.reward}) | set(c)
    seps = minimal_separators(h, g.action, g.reward, set(c), allowed, limit=limit)
    return [s - set(c) for s in seps if s - set(c)]


def context_specific_surrogate(g: Ldag, c) -> Optional[FrozenSet[str]]:
    """Canonical surrogate for context ``c``, or None.

    An empty separator means the context variables alone cut the action off
    from the reward; that case is handled by the backdoor test, so it is not
    reported as a surrogate.
    """
    found = surrogate_candidates(g, PartialAssignment(c), limit=1)
    return found[0] if found else None


# -- identification -----------------------------------------------------

@dataclass(frozen=True)
class IdFormula:
    """Observational expression for P(s | do(x), r, c).

    The estimand is ``sum_a P(s | x, a, r_rest, c, ext) P(a | r_rest, c, ext)``
    where ``r_rest`` drops the ``transported`` variables, whose values are
    replaced by ``extension``.  ``rule`` is ``adjustment`` (no extension) or
    ``transport``.
    """

    target: Tuple[str, ...]
    context: PartialAssignment
    given: Tuple[str, ...]
    rule: str
    adjustment: Tuple[str, ...] = ()
    extension: PartialAssignment = field(default_factory=PartialAssignment)
    transported: Tuple[str, ...] = ()

    def describe(self) -> str:
        cond = ["x"] + [v for v in self.given if v not in self.transported]
        cond += [f"{k}={v}" for k, v in self.context.items()]
        cond += [f"{k}={v}" for k, v in self.extension.items()]
        cond += list(self.adjustment)
        rest = [v for v in self.target if v not in self.given]
        body = f"P({','.join(rest) or '-'} | {','.join(cond)})"
        if self.adjustment:
            base = [v for v in cond if v not in self.adjustment and v != "x"]
            body = f"sum_{{{','.join(self.adjustment)}}} {body} P({','.join(self.adjustment)} | {','.join(base)})"
        return body

    def to_dict(self) -> dict:
        return {"rule": self.rule, "target": list(self.target), "context": self.context.to_dict(),
                "given": list(self.given), "adjustment": list(self.adjustment),
                "extension": self.extension.to_dict(), "transported": list(self.transported),
                "expression": self.describe()}

    def evaluate(self, g: Ldag, obs: JointTable, x: str, r: PartialAssignment) -> np.ndarray:
        """Distribution over ``target`` (axes in target order) for action value ``x``."""
        target = self.target
        overlap = [v for v in target if v in self.given]
        rest = [v for v in target if v not in self.given]
        q = r.restrict(v for v in self.given if v not in self.transported)
        q = q.union(self.context).union(self.extension)
        if rest:
            cond = self._conditional(g, obs, x, q, rest)
        else:
            cond = np.ones(())
        # place the overlap indicator on the remaining target axes
        shape = tuple(len(g.domain(v)) for v in target)
        out = np.zeros(shape)
        idx = []
        for v in target:
            idx.append(g.domain(v).index(r[v]) if v in overlap else slice(None))
        out[tuple(idx)] = cond
        return out

    def _conditional(self, g, obs, x, q, rest):
        a = list(self.adjustment)
        names = set(rest) | {g.action} | set(a) | set(q)
        t = obs.marginal(names).slice(q)
        if t.total <= 0:
            raise ZeroMassContext(q)
        order = list(rest) + [g.action] + a
        t = t.reorder(order)
        xi = g.domain(g.action).index(x)
        k = len(rest)
        joint_sxa = t.probs.take(xi, axis=k)          # rest..., a...
        p_xa = joint_sxa.sum(axis=tuple(range(k)))    # a...
        p_a = t.probs.sum(axis=tuple(range(k + 1)))   # a...
        total = p_a.sum()
        need = p_a > 0
        if np.any(p_xa[need] <= 0):
            raise ZeroMassContext(q.union({g.action: x}))
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(need, joint_sxa / np.where(need, p_xa, 1.0), 0.0)
        weights = p_a / total
        return np.tensordot(cond, weights, axes=(list(range(k, cond.ndim)), list(range(weights.ndim)))) \
            if a else cond


def _adjustment_sets(gc: Ldag, g: Ldag, s: Sequence[str], cond: Iterable[str]) -> List[Tuple[str, ...]]:
    cond = set(cond)
    x = g.action
    base = {x} | set(s) | cond
    full = (gc.ancestors(base) & set(g.observed)) - g.descendants([x]) - base
    out = [()]
    if full:
        out.append(g.sort(full))
    return out


def csi_identify(g: Ldag, s: Iterable[str], c, given: Optional[Iterable[str]] = None,
                 obs: Optional[JointTable] = None) -> Optional[IdFormula]:
    """Express P(s | do(x), r, c) observationally, or return None.

    Rules, in order:

    * adjustment: a covariate set A (empty, then all observed ancestors that
      are not descendants of the action) such that, in the context-specific
      DAG with the action's outgoing edges cut, ``A | r | c`` separates the
      action from ``s``;
    * transport: replace some readable context variables K by a fixed value
      ``ext`` when ``s`` does not depend on K once the action is set (checked
      in the context-specific DAG with edges into the action cut) and, in the
      DAG for ``c | ext``, the action is unconfounded with ``s`` given the rest.

    With ``obs`` the formula is also checked for positivity on every
    ``(x, r)`` cell with positive weight; cells that would divide by zero make
    the candidate unusable.
    """
    c = PartialAssignment(c)
    s = g.sort(s)
    if set(s) & (set(c) | {g.action}):
        raise ValueError("target must avoid the action and the context variables")
    given = g.sort(set(g.policy_scope) - set(c)) if given is None else g.sort(given)
    rest = [v for v in s if v not in given]
    x = g.action
    gc = context_specific_dag(g, c)
    cut_out = mutilate(gc, (), {x})
    cond = set(given) | set(c)
    for adj in _adjustment_sets(gc, g, rest, cond):
        if not rest or d_separated(cut_out, {x}, set(rest), set(adj) | cond):
            f = IdFormula(s, c, given, "adjustment", adj)
            if obs is None or _positive(f, g, obs):
                return f
    if not rest:
        return None
    cut_in = mutilate(gc, {x}, ())
    pool = [v for v in g.sort(context_variables(g) & set(g.policy_scope)) if v not in c and v in given]
    for size in range(1, len(pool) + 1):
        for k in itertools.combinations(pool, size):
            kept = [v for v in given if v not in k]
            if not d_separated(cut_in, set(rest), set(k), {x} | set(kept) | set(c)):
                continue
            for ext in g.assignments(k):
                ge = context_specific_dag(g, c.union(ext))
                ge_out = mutilate(ge, (), {x})
                base = set(kept) | set(c) | set(k)
                for adj in _adjustment_sets(ge, g, rest, base):
                    if d_separated(ge_out, {x}, set(rest), set(adj) | base):
                        f = IdFormula(s, c, given, "transport", adj, ext, k)
                        if obs is None or _positive(f, g, obs):
                            return f
    return None


def _positive(f: IdFormula, g: Ldag, obs: JointTable) -> bool:
    try:
        pc = obs.prob(f.context) if f.context else 1.0
        if pc <= 0:
            return True
        rt = obs.marginal(set(f.given) | set(f.context)).slice(f.context)
        for r in g.assignments(f.given):
            if rt.slice(r).total <= 0:
                continue
            for xv in g.domain(g.action):
                f.evaluate(g, obs, xv, r)
    except ZeroMassContext:
        return False
    return True


# -- linear system ------------------------------------------------------

@dataclass
class PolicyEquationSystem:
    """A @ pi = b with one simplex block per assignment of ``given``.

    Columns are ordered ``(r, x)`` with ``r`` major.  Rows index outcomes of
    the surrogate set.  ``vacuous`` marks a zero-mass context where any
    policy works.
    """

    A: np.ndarray
    b: np.ndarray
    given: Tuple[str, ...]
    rows_r: List[PartialAssignment]
    action_domain: Tuple[str, ...]
    target: Tuple[str, ...] = ()
    context: PartialAssignment = field(default_factory=PartialAssignment)
    vacuous: bool = False

    @property
    def n_blocks(self) -> int:
        return len(self.rows_r)

    @property
    def n_actions(self) -> int:
        return len(self.action_domain)

    def simplex_matrix(self) -> np.ndarray:
        return np.kron(np.eye(self.n_blocks), np.ones((1, self.n_actions)))


def build_equation_system(g: Ldag, s: Iterable[str], c, formula: IdFormula,
                          obs: JointTable) -> PolicyEquationSystem:
    c = PartialAssignment(c)
    s = g.sort(s)
    if tuple(formula.target) != tuple(s) or formula.context != c:
        raise ValueError("formula targets a different set or context")
    given = formula.given
    rows_r = list(g.assignments(given))
    xs = g.domain(g.action)
    n_out = math.prod(len(g.domain(v)) for v in s)
    A = np.zeros((n_out, len(rows_r) * len(xs)))
    pc = obs.prob(c) if c else 1.0
    if pc <= 0:
        return PolicyEquationSystem(np.zeros((0, A.shape[1])), np.zeros(0), given, rows_r, xs,
                                    tuple(s), c, vacuous=True)
    rt = obs.marginal(set(given) | set(c)).slice(c)
    rt = rt.reorder(given) if given else rt
    p_r = rt.probs / rt.total
    for i, r in enumerate(rows_r):
        w = float(p_r[tuple(g.domain(v).index(r[v]) for v in given)]) if given else 1.0
        if w <= 0:
            continue
        for j, xv in enumerate(xs):
            A[:, i * len(xs) + j] = w * formula.evaluate(g, obs, xv, r).reshape(-1)
    st = obs.marginal(set(s) | set(c)).slice(c).reorder(s)
    b = st.probs.reshape(-1) / st.total
    return PolicyEquationSystem(A, b, given, rows_r, xs, tuple(s), c)


@dataclass
class PolicySolution:
    cells: np.ndarray          # (blocks, actions)
    residual: float
    feasible: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "residual": self.residual, "tolerance": self.tolerance}


def solve_policy_equations(system: PolicyEquationSystem, tol: float = EXACT_TOL,
                           slack: float = 0.0) -> PolicySolution:
    """Minimum-norm stochastic solution of the system, or an infeasible marker.

    A linear program first finds the smallest achievable infinity-norm
    residual ``t``.  If ``t <= tol`` the minimum Euclidean norm policy is
    taken among those with residual at most ``max(t, slack * tol)``.  With
    ``slack=0`` this is the exact-equation case: the right-hand side is
    projected onto the reachable set and the answer is polished on its
    support with a least-squares solve.  A positive ``slack`` suits
    empirical tables, where pinning the noisy right-hand side exactly can
    push weakly determined rows to the boundary.
    """
    nb, na = system.n_blocks, system.n_actions
    n = nb * na
    if system.vacuous or system.A.shape[0] == 0:
        return PolicySolution(np.full((nb, na), 1.0 / na), 0.0, True, tol)
    A, b = system.A, system.b
    E = system.simplex_matrix()
    m = A.shape[0]
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.concatenate([b, -b])
    A_eq = np.hstack([E, np.zeros((nb, 1))])
    lp = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(nb),
                 bounds=[(0, 1)] * n + [(0, None)], method="highs")
    if not lp.success:
        return PolicySolution(np.full((nb, na), 1.0 / na), math.inf, False, tol)
    pi_lp = np.clip(lp.x[:n], 0, 1)
    best = float(np.max(np.abs(A @ pi_lp - b)))
    if best > tol:
        return PolicySolution(_normalize(pi_lp, nb, na), best, False, tol)

    band = max(best, slack * tol)
    if slack > 0 and band > 1e-12:
        candidates = [_min_norm_band(A, b, E, band, pi_lp), pi_lp]
    else:
        M = np.vstack([A, E])
        d = np.concatenate([A @ pi_lp, np.ones(nb)])
        weight = 1e6
        ls = lsq_linear(np.vstack([weight * M, np.eye(n)]), np.concatenate([weight * d, np.zeros(n)]),
                        bounds=(0, 1), method="bvls", tol=1e-14)
        candidates = [_polish(M, d, ls.x), ls.x, pi_lp]
    for cand in candidates:
        if cand is None:
            continue
        cells = _normalize(cand, nb, na)
        res = float(np.max(np.abs(A @ cells.reshape(-1) - b)))
        if res <= tol:
            return PolicySolution(cells, res, True, tol)
    return PolicySolution(_normalize(pi_lp, nb, na), best, True, tol)


def _min_norm_band(A, b, E, band, x0):
    """argmin ||pi||^2 subject to |A pi - b| <= band, simplex blocks, 0 <= pi <= 1."""
    cons = [
        {"type": "eq", "fun": lambda v: E @ v - 1.0, "jac": lambda v: E},
        {"type": "ineq", "fun": lambda v: band - (A @ v - b), "jac": lambda v: -A},
        {"type": "ineq", "fun": lambda v: band + (A @ v - b), "jac": lambda v: A},
    ]
    res = minimize(lambda v: float(v @ v), x0, jac=lambda v: 2 * v, method="SLSQP",
                   bounds=[(0, 1)] * len(x0), constraints=cons,
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x if res.success else None


def _polish(M, d, x, eps=1e-10):
    support = x > eps
    if not support.any():
        return None
    sol, *_ = np.linalg.lstsq(M[:, support], d, rcond=None)
    if np.any(sol < -1e-12):
        return None
    out = np.zeros_like(x)
    out[support] = np.clip(sol, 0, None)
    return out


def _normalize(vec, nb, na):
    cells = np.clip(np.asarray(vec, dtype=float).reshape(nb, na), 0, None)
    sums = cells.sum(axis=1, keepdims=True)
    cells = np.where(sums > 0, cells / np.where(sums > 0, sums, 1.0), 1.0 / na)
    return cells


def sampled_tolerance(obs: JointTable) -> float:
    """Residual tolerance for an empirical table of ``obs.sample_size`` draws."""
    cells = max(obs.probs.size, 2)
    return 3.0 * math.sqrt(math.log(cells) / obs.sample_size)


# -- recursive search ---------------------------------------------------

@dataclass
class _Leaf:
    context: PartialAssignment
    kind: str
    reads: Tuple[str, ...]
    rule: object
    detail: dict


@dataclass
class _Split:
    var: str
    children: Dict[str, object]


class _Search:
    def __init__(self, g, obs, tol, alternates, threads, slack):
        self.g = g
        self.obs = obs
        self.tol = tol
        self.slack = slack
        self.alternates = alternates
        self.threads = threads
        self.branchable = [v for v in g.sort(context_variables(g) & set(g.policy_scope))
                           if v != g.action and v != g.reward]
        self.results: Dict[PartialAssignment, ContextResult] = {}

    def run(self, used: Tuple[str, ...], c: PartialAssignment):
        g, obs = self.g, self.obs
        if c and obs.prob(c) <= 0:
            self.results[c] = ContextResult(c, "vacuous")
            return _Leaf(c, "vacuous", (), None, {})
        z = find_sep(context_specific_dag(g, c), c=set(c))
        if z is not None:
            self.results[c] = ContextResult(c, "separator", z)
            reads = g.sort(set(z) | set(c))
            look = ConditionalLookup(obs, g.action, reads)
            return _Leaf(c, "separator", reads, look, {})
        leaf = self._surrogate(c)
        if leaf is not None:
            return leaf
        free = [v for v in self.branchable if v not in used]
        if not free:
            self.results[c] = ContextResult(c, "failure")
            return None
        var = self._choose(free, c)
        values = list(g.domain(var))
        args = [(used + (var,), c.union({var: v})) for v in values]
        if self.threads > 1 and not used:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                kids = list(ex.map(lambda a: self.run(*a), args))
        else:
            kids = []
            for a in args:
                kid = self.run(*a)
                kids.append(kid)
                if kid is None:
                    break
        if any(k is None for k in kids):
            return None
        return _Split(var, dict(zip(values, kids)))

    def _choose(self, free, c):
        gc = context_specific_dag(self.g, c)
        counts = {v: 0 for v in free}
        for e in gc.edges:
            for lab in e.labels:
                for v in lab:
                    if v in counts:
                        counts[v] += 1
        return max(free, key=lambda v: (counts[v], -self.g.order[v]))

    def _surrogate(self, c):
        g, obs = self.g, self.obs
        tried = []
        for sset in surrogate_candidates(g, c, limit=1 + self.alternates):
            f = csi_identify(g, sset, c, obs=obs)
            if f is None:
                tried.append({"surrogate": list(g.sort(sset)), "status": "not identified"})
                continue
            system = build_equation_system(g, sset, c, f, obs)
            sol = solve_policy_equations(system, self.tol, self.slack)
            if not sol.feasible:
                tried.append({"surrogate": list(g.sort(sset)), "status": "infeasible",
                              "residual": sol.residual})
                continue
            detail = {"surrogate": list(g.sort(sset)), "formula": f.to_dict(),
                      "residual": sol.residual, "tolerance": sol.tolerance}
            if tried:
                detail["rejected"] = tried
            self.results[c] = ContextResult(c, "surrogate", None, detail)
            reads = g.sort(set(f.given) | set(c))
            return _Leaf(c, "surrogate", reads, (system, sol), detail)
        if tried:
            self.results.setdefault(c, ContextResult(c, "failure", None, {"rejected": tried}))
        return None


def imitate_with_data(g: Ldag, obs: JointTable, tol: Optional[float] = None,
                      alternates: int = 7, threads: int = 1) -> ImitabilityVerdict:
    """Search for an imitating policy given the graph and P(O).

    At each context: try a pi-backdoor set in the context-specific DAG,
    then a surrogate with an identified, solvable policy system, then split
    on a readable context variable not yet fixed.  Returns Imitable with the
    assembled policy or Unknown; never NotImitable.
    """
    if reward_unaffected(g):
        return ImitabilityVerdict(Decision.IMITABLE, PolicyTable.uniform(g),
                                  notes=["reward is not a descendant of the action; every policy imitates"])
    notes = []
    slack = 0.0
    if obs.sample_size is not None:
        slack = SAMPLED_SLACK
    if tol is None:
        if obs.sample_size is None:
            tol = EXACT_TOL
        else:
            tol = sampled_tolerance(obs)
            notes.append(f"empirical table from {obs.sample_size} samples; residual tolerance {tol:.3g}")
    search = _Search(g, obs, tol, alternates, threads, slack)
    tree = search.run((), PartialAssignment())
    per = _ordered(g, search.results)
    if tree is None:
        return ImitabilityVerdict(Decision.UNKNOWN, per_context=per,
                                  notes=notes + ["no separator, surrogate or split succeeded"])
    return ImitabilityVerdict(Decision.IMITABLE, _assemble(g, tree), per_context=per, notes=notes)


def _ordered(g, results):
    def key(c):
        return (len(c), [(g.order[k], g.domain(k).index(v)) for k, v in sorted(c.items(), key=lambda kv: g.order[kv[0]])])
    return {c: results[c] for c in sorted(results, key=key)}


def _reads(node) -> set:
    if isinstance(node, _Leaf):
        return set(node.reads)
    out = {node.var}
    for kid in node.children.values():
        out |= _reads(kid)
    return out


def _assemble(g: Ldag, tree) -> PolicyTable:
    scope = g.sort(_reads(tree))

    def rule(pa):
        node = tree
        while isinstance(node, _Split):
            node = node.children[pa[node.var]]
        if node.kind == "vacuous":
            return None
        if node.kind == "separator":
            return node.rule.get(pa.restrict(node.reads))
        system, sol = node.rule
        r = pa.restrict(system.given)
        return sol.cells[system.rows_r.index(r)]

    return PolicyTable.from_rule(g, scope, rule)
