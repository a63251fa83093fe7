"""Brute-force reference computations.

Nothing here reuses the traversal or inference code of the main modules:
adjacency is rebuilt from the raw edge list and probabilities come from
plain enumeration of joint states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import ResourceLimitError
from .ldag import LabeledEdge, Ldag, VariableDecl

PATH_VERTEX_CAP = 12
ENUM_STATE_CAP = 2 ** 18
SAT_VAR_CAP = 20


@dataclass
class OracleReport:
    suite: str
    checked: int = 0
    mismatches: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {"suite": self.suite, "checked": self.checked, "passed": self.passed,
                "mismatches": self.mismatches}


# -- d-separation by path enumeration ------------------------------------

def dsep_by_paths(g: Ldag, x: Iterable[str], y: Iterable[str], z: Iterable[str]) -> bool:
    """True when every simple path between ``x`` and ``y`` is blocked by ``z``."""
    names = [v.name for v in g.variables]
    if len(names) > PATH_VERTEX_CAP:
        raise ResourceLimitError(f"path enumeration limited to {PATH_VERTEX_CAP} vertices")
    x, y, z = set(x), set(y), set(z)
    arrows = {(e.source, e.target) for e in g.edges}
    nbrs = {n: set() for n in names}
    kids = {n: set() for n in names}
    for a, b in arrows:
        nbrs[a].add(b)
        nbrs[b].add(a)
        kids[a].add(b)

    def below(v):
        out, todo = set(), [v]
        while todo:
            u = todo.pop()
            if u in out:
                continue
            out.add(u)
            todo.extend(kids[u])
        return out

    z_touch = {v for v in names if below(v) & z}

    def open_path(path):
        for i in range(1, len(path) - 1):
            a, v, b = path[i - 1], path[i], path[i + 1]
            collider = (a, v) in arrows and (b, v) in arrows
            if collider and v not in z_touch:
                return False
            if not collider and v in z:
                return False
        return True

    def walk(path):
        last = path[-1]
        if last in y:
            return open_path(path)
        for nxt in sorted(nbrs[last]):
            if nxt not in path and nxt not in x:
                if walk(path + [nxt]):
                    return True
        return False

    return not any(walk([s]) for s in sorted(x))


# -- exact enumeration --------------------------------------------------

def _states(m, cap):
    g = m.graph
    doms = [g.domain(n) for n in g.names]
    size = 1
    for d in doms:
        size *= len(d)
    if size > cap:
        raise ResourceLimitError(f"{size} states exceed enumeration cap {cap}")
    return g.names, doms


def _weight(m, state, skip=None):
    g = m.graph
    w = 1.0
    for name in g.names:
        if name == skip:
            continue
        cpt = m.cpts[name]
        idx = tuple(g.domain(p).index(state[p]) for p in cpt.parents)
        w *= cpt.table[idx][g.domain(name).index(state[name])]
        if w == 0.0:
            break
    return w


def enumerate_reward(m, policy=None, cap: int = ENUM_STATE_CAP) -> np.ndarray:
    """P(y) or P(y | do(policy)) by summing the factorized joint state by state."""
    g = m.graph
    names, doms = _states(m, cap)
    ydom = g.domain(g.reward)
    out = np.zeros(len(ydom))
    for values in itertools.product(*doms):
        state = dict(zip(names, values))
        if policy is None:
            w = _weight(m, state)
        else:
            w = _weight(m, state, skip=g.action)
            if w:
                w *= policy.row(state)[g.domain(g.action).index(state[g.action])]
        out[ydom.index(state[g.reward])] += w
    return out


def policy_gap(m, policy, cap: int = ENUM_STATE_CAP) -> float:
    return float(np.max(np.abs(enumerate_reward(m, policy, cap) - enumerate_reward(m, None, cap))))


def verify_policy(m, policy, tol: float = 1e-9, cap: int = ENUM_STATE_CAP) -> bool:
    """max_y |P(y | do(policy)) - P(y)| <= tol, by enumeration."""
    return policy_gap(m, policy, cap) <= tol


def min_policy_gap(m, scope: Optional[Sequence[str]] = None, cap: int = ENUM_STATE_CAP) -> float:
    """Smallest achievable max_y |P(y | do(pi)) - P(y)| over policies on ``scope``.

    P(y | do(pi)) is linear in the policy cells, so this is a small LP.
    """
    g = m.graph
    scope = list(g.policy_scope if scope is None else scope)
    names, doms = _states(m, cap)
    ydom, xdom = g.domain(g.reward), g.domain(g.action)
    rows = list(itertools.product(*[g.domain(s) for s in scope]))
    col = {(r, xv): i for i, (r, xv) in enumerate(itertools.product(rows, xdom))}
    coef = np.zeros((len(ydom), len(col)))
    target = np.zeros(len(ydom))
    for values in itertools.product(*doms):
        state = dict(zip(names, values))
        w = _weight(m, state, skip=g.action)
        if not w:
            continue
        yi = ydom.index(state[g.reward])
        coef[yi, col[(tuple(state[s] for s in scope), state[g.action])]] += w
        cpt = m.cpts[g.action]
        target[yi] += w * cpt.table[tuple(g.domain(p).index(state[p]) for p in cpt.parents)][
            xdom.index(state[g.action])]
    n = len(col)
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    ones = np.ones((len(ydom), 1))
    a_ub = np.vstack([np.hstack([coef, -ones]), np.hstack([-coef, -ones])])
    b_ub = np.concatenate([target, -target])
    a_eq = np.zeros((len(rows), n + 1))
    for (r, xv), i in col.items():
        a_eq[rows.index(r), i] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.ones(len(rows)),
                  bounds=[(0, 1)] * n + [(0, None)], method="highs")
    return float(res.x[-1])


@dataclass
class AdversarialResult:
    gap: float
    model: Optional[object]
    trials: int


def adversarial_scm_search(g: Ldag, trials: int = 200, seed: int = 0) -> AdversarialResult:
    """Look for a compatible model where no policy matches P(y).

    Alternates random Dirichlet models (sharpened) with noisy parity
    models.  For each model the best policy gap is computed exactly.
    """
    from .generators import random_scm_for_ldag, xor_scm_for_ldag

    if g.reward not in _below(g, g.action):
        return AdversarialResult(0.0, None, 0)
    best = AdversarialResult(-1.0, None, trials)
    rng = np.random.default_rng(seed)
    for t in range(trials):
        s = int(rng.integers(2 ** 31))
        if t % 2 == 0:
            m = xor_scm_for_ldag(g, s, noise=0.2)
        else:
            m = random_scm_for_ldag(g, s, concentration=0.3)
        gap = min_policy_gap(m)
        if gap > best.gap:
            best = AdversarialResult(gap, m, trials)
    return best


def _below(g, v):
    kids = {}
    for e in g.edges:
        kids.setdefault(e.source, []).append(e.target)
    out, todo = set(), [v]
    while todo:
        u = todo.pop()
        if u not in out:
            out.add(u)
            todo.extend(kids.get(u, []))
    return out


# -- SAT ----------------------------------------------------------------

def exhaustive_sat(f) -> bool:
    if f.num_vars > SAT_VAR_CAP:
        raise ResourceLimitError(f"truth table limited to {SAT_VAR_CAP} variables")
    for bits in itertools.product((False, True), repeat=f.num_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in f.clauses):
            return True
    return False


# -- suites -------------------------------------------------------------

def random_dag(rng: np.random.Generator, n: int, p: Optional[float] = None) -> Ldag:
    """Plain random DAG on ``V0..V{n-1}`` with edge probability ``p``."""
    p = float(rng.uniform(0.15, 0.6)) if p is None else p
    names = [f"V{i}" for i in range(n)]
    perm = rng.permutation(n)
    decls = [VariableDecl(nm, role="action" if i == 0 else "reward" if i == n - 1 else "plain")
             for i, nm in enumerate(names)]
    edges = [LabeledEdge(names[perm[i]], names[perm[j]])
             for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Ldag(decls, edges, policy_scope=())


def random_query(rng: np.random.Generator, names: Sequence[str]):
    names = list(names)
    order = list(rng.permutation(len(names)))
    nx = int(rng.integers(1, max(1, len(names) // 3) + 1))
    ny = int(rng.integers(1, max(1, min(len(names) // 3, len(names) - nx)) + 1))
    xs = [names[i] for i in order[:nx]]
    ys = [names[i] for i in order[nx:nx + ny]]
    zs = [names[i] for i in order[nx + ny:] if rng.random() < 0.4]
    return xs, ys, zs


def dsep_suite(graphs: int, queries: int, seed: int, max_n: int = 10) -> OracleReport:
    from .ldag import d_separated

    rng = np.random.default_rng(seed)
    rep = OracleReport("dsep")
    for _ in range(graphs):
        g = random_dag(rng, int(rng.integers(2, max_n + 1)))
        for _ in range(queries):
            xs, ys, zs = random_query(rng, g.names)
            if not ys:
                continue
            want = dsep_by_paths(g, xs, ys, zs)
            got = d_separated(g, xs, ys, zs)
            rep.checked += 1
            if want != got:
                rep.mismatches.append({"graph": g.to_dict(), "x": xs, "y": ys, "z": zs,
                                       "expected": want, "got": got})
    return rep


def policy_suite(trials: int, seed: int) -> OracleReport:
    from .generators import CensusConfig, random_ldag, random_scm_for_ldag
    from .policy import PolicyTable
    from .scm import reward_distribution

    rng = np.random.default_rng(seed)
    rep = OracleReport("policy")
    for t in range(trials):
        cfg = CensusConfig(n=int(rng.integers(4, 9)), max_degree=3,
                           num_context_vars=int(rng.integers(1, 3)))
        g = random_ldag(cfg, seed=int(rng.integers(2 ** 31)))
        m = random_scm_for_ldag(g, int(rng.integers(2 ** 31)))
        scope = [v for v in g.policy_scope if rng.random() < 0.6]
        shape = tuple(len(g.domain(v)) for v in scope) + (len(g.domain(g.action)),)
        pi = PolicyTable(g.action, tuple(scope), tuple(g.domain(v) for v in scope),
                         g.domain(g.action), rng.dirichlet(np.ones(shape[-1]), size=shape[:-1]))
        want = enumerate_reward(m, pi)
        got = reward_distribution(m, pi)
        rep.checked += 1
        if np.max(np.abs(want - got)) > 1e-12:
            rep.mismatches.append({"trial": t, "expected": want.tolist(), "got": got.tolist()})
    return rep


def sat_suite(trials: int, seed: int, max_vars: int = 8, max_clauses: int = 12) -> OracleReport:
    from .generators import random_3sat, sat_to_ldag
    from .imitability import Decision, imitate_graphical

    rng = np.random.default_rng(seed)
    rep = OracleReport("sat")
    for t in range(trials):
        f = random_3sat(int(rng.integers(3, max_vars + 1)), int(rng.integers(1, max_clauses + 1)),
                        rng, unsat_core=bool(t % 2))
        unsat = not exhaustive_sat(f)
        got = imitate_graphical(sat_to_ldag(f)).decision == Decision.IMITABLE
        rep.checked += 1
        if got != unsat:
            rep.mismatches.append({"cnf": f.to_dimacs(), "unsat": unsat, "imitable": got})
    return rep
