"""Instance generators: random LDAGs and SCMs, 3-SAT encodings, the sales model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GraphFormatError
from .gallery import sales_graph
from .ldag import LabeledEdge, Ldag, PartialAssignment, VariableDecl, build_ldag
from .scm import Cpt, DiscreteScm


@dataclass(frozen=True)
class CensusConfig:
    """Random-graph parameters.

    ``max_degree=None`` means ``max(3, n // 10)``.  Edges are added until
    ``edge_factor * n`` are placed (default ``degree_cap / 2``, i.e. average
    degree close to the cap) or no admissible pair is left.

    ``context_pool`` picks where context variables come from: ``parents``
    (observed parents of the action or reward), ``ancestors`` (observed
    ancestors of either) or ``any``; all pools exclude descendants of the
    action and fall back to ``any`` when too small.  ``label_mode`` is
    ``per_assignment`` (every assignment of a child's other context parents
    becomes a label of the edge independently with ``label_prob``) or
    ``per_edge`` (at most one random label per edge).
    """

    n: int = 50
    max_degree: Optional[int] = None
    latent_prob: float = 1 / 6
    num_context_vars: int = 3
    label_prob: float = 0.5
    samples: int = 100
    seed: int = 0
    edge_factor: Optional[float] = None
    context_pool: str = "parents"
    label_mode: str = "per_assignment"

    @property
    def degree_cap(self) -> int:
        return self.max_degree if self.max_degree is not None else max(3, self.n // 10)


def random_ldag(cfg: CensusConfig, seed: Optional[int] = None, max_retries: int = 50) -> Ldag:
    """Random labeled DAG whose context variables are observed roots.

    Vertices ``V0..V{n-1}`` are in topological order.  Edges are proposed
    uniformly among forward pairs and kept while both endpoints are under the
    degree cap.  The action has at least one descendant and the reward is
    one of them.  Context variables are observed non-descendants of the
    action with incoming edges removed, so the context set is closed under
    parents.  Labels bind the child's other context parents (see
    :class:`CensusConfig`).
    """
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries):
        g = _try_random_ldag(cfg, rng)
        if g is not None:
            g.meta["seed"] = int(seed)
            g.meta["retries"] = attempt
            return g
    raise RuntimeError(f"no valid graph after {max_retries} attempts (seed {seed})")


def _try_random_ldag(cfg: CensusConfig, rng: np.random.Generator) -> Optional[Ldag]:
    n, cap = cfg.n, cfg.degree_cap
    if n < 3:
        raise ValueError("need at least 3 vertices")
    names = [f"V{i}" for i in range(n)]
    deg = np.zeros(n, dtype=int)
    edges = set()
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    factor = cfg.edge_factor if cfg.edge_factor is not None else cap / 2
    target = int(factor * n)
    for k in rng.permutation(len(pairs)):
        if len(edges) >= target:
            break
        i, j = pairs[k]
        if deg[i] < cap and deg[j] < cap:
            edges.add((i, j))
            deg[i] += 1
            deg[j] += 1
    children = {i: [] for i in range(n)}
    for i, j in edges:
        children[i].append(j)

    def desc(i):
        seen, stack = {i}, [i]
        while stack:
            for c in children[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return seen

    with_desc = [i for i in range(n) if children[i]]
    if not with_desc:
        return None
    x = int(rng.choice(with_desc))
    dx = desc(x)
    y = int(rng.choice(sorted(dx - {x})))
    latent = {i for i in range(n) if i not in (x, y) and rng.random() < cfg.latent_prob}
    latent.add(y)
    pool = [i for i in range(n) if i not in dx and i != y and i not in latent]
    parents_of = {j: [] for j in range(n)}
    for i, j in edges:
        parents_of[j].append(i)
    if cfg.context_pool == "ancestors":
        up, stack = {x, y}, [x, y]
        while stack:
            for p in parents_of[stack.pop()]:
                if p not in up:
                    up.add(p)
                    stack.append(p)
        near = [i for i in pool if i in up]
        if len(near) >= cfg.num_context_vars:
            pool = near
    elif cfg.context_pool == "parents":
        near = [i for i in pool if i in set(parents_of[x]) | set(parents_of[y])]
        if len(near) >= cfg.num_context_vars:
            pool = near
    k = cfg.num_context_vars
    if len(pool) < k:
        return None
    ctx = sorted(int(v) for v in rng.choice(pool, size=k, replace=False))
    # make context variables roots; they are not descendants of x so de(x) is untouched
    edges = {(i, j) for i, j in edges if j not in ctx}
    ctx_set = set(ctx)
    parents = {j: sorted(i for i, jj in edges if jj == j) for j in range(n)}
    labeled = []
    for i, j in sorted(edges):
        cpar = [p for p in parents[j] if p in ctx_set and p != i]
        labels = ()
        if cpar and cfg.label_mode == "per_assignment":
            labels = tuple({names[p]: str(v) for p, v in zip(cpar, vals)}
                           for vals in itertools.product((0, 1), repeat=len(cpar))
                           if rng.random() < cfg.label_prob)
        elif cpar and rng.random() < cfg.label_prob:
            labels = ({names[p]: str(int(rng.integers(2))) for p in cpar},)
        labeled.append((names[i], names[j], labels))
    g = build_ldag(names, labeled, latent=[names[i] for i in latent],
                   action=names[x], reward=names[y],
                   meta={"context_vars": [names[i] for i in ctx], "action": names[x],
                         "reward": names[y]})
    return g


def _label_classes(g: Ldag, name: str) -> Tuple[List[PartialAssignment], List[int]]:
    """Parent assignments of ``name`` and, for each, the index of its class representative.

    Two assignments share a class when some label makes them differ only in
    the value of the parent whose edge the label switches off.
    """
    parents = tuple(g.parents(name))
    assigns = list(g.assignments(parents))
    index = {a: i for i, a in enumerate(assigns)}
    root = list(range(len(assigns)))

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for p in parents:
        for lab in g.edge(p, name).labels:
            for a in assigns:
                if a.extends(lab) and a[p] != g.domain(p)[0]:
                    b = index[a.drop([p]).union({p: g.domain(p)[0]})]
                    ra, rb = find(index[a]), find(b)
                    if ra != rb:
                        root[max(ra, rb)] = min(ra, rb)
    return assigns, [find(i) for i in range(len(assigns))]


def random_scm_for_ldag(g: Ldag, seed: int, domain_size: int = 2,
                        concentration: float = 1.0) -> DiscreteScm:
    """Random CPTs that honour every label of ``g``.

    Parent assignments that labels make interchangeable share one Dirichlet
    row.  ``domain_size`` is unused when the graph already declares domains;
    it is kept for graphs built from names.
    """
    rng = np.random.default_rng(seed)
    cpts = {}
    for name in g.names:
        parents = tuple(g.parents(name))
        k = len(g.domain(name))
        assigns, cls = _label_classes(g, name)
        rows = {}
        table = np.empty(tuple(len(g.domain(p)) for p in parents) + (k,))
        for a, r in zip(assigns, cls):
            if r not in rows:
                rows[r] = rng.dirichlet(np.full(k, concentration))
            table[tuple(g.domain(p).index(a[p]) for p in parents)] = rows[r]
        cpts[name] = Cpt(name, parents, table)
    return DiscreteScm(g, cpts)


def xor_scm_for_ldag(g: Ldag, seed: int, noise: float = 0.05) -> DiscreteScm:
    """Near-deterministic parity mechanisms, labels respected.

    Each class of interchangeable parent assignments takes the parity of the
    parents whose edges are active at the class representative, flipped with
    probability ``noise``.  Roots are fair coins.
    """
    rng = np.random.default_rng(seed)
    cpts = {}
    for name in g.names:
        parents = tuple(g.parents(name))
        k = len(g.domain(name))
        table = np.empty(tuple(len(g.domain(p)) for p in parents) + (k,))
        flip = float(rng.uniform(0, noise))
        assigns, cls = _label_classes(g, name)
        for a, r in zip(assigns, cls):
            rep = assigns[r]
            active = [p for p in parents if not any(rep.extends(l) for l in g.edge(p, name).labels)]
            row = np.full(k, flip / max(k - 1, 1))
            row[sum(g.domain(p).index(rep[p]) for p in active) % k] = 1.0 - flip
            table[tuple(g.domain(p).index(a[p]) for p in parents)] = row
        if not parents:
            table[:] = 1.0 / k
        cpts[name] = Cpt(name, parents, table)
    return DiscreteScm(g, cpts)


# -- 3-SAT --------------------------------------------------------------

@dataclass(frozen=True)
class CnfFormula:
    """3-CNF over variables ``1..num_vars``; negative literals are negations."""

    num_vars: int
    clauses: Tuple[Tuple[int, int, int], ...] = ()

    def __post_init__(self):
        cl = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", cl)
        for c in cl:
            if len(c) != 3:
                raise ValueError(f"clause {c} does not have 3 literals")
            if len({abs(l) for l in c}) != 3:
                raise ValueError(f"clause {c} repeats a variable")
            if any(l == 0 or abs(l) > self.num_vars for l in c):
                raise ValueError(f"clause {c} has a literal out of range")

    def satisfied_by(self, values: Sequence[bool]) -> bool:
        return all(any(values[abs(l) - 1] == (l > 0) for l in c) for c in self.clauses)

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(str(l) for l in c) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = None
    clauses: List[Tuple[int, ...]] = []
    current: List[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise GraphFormatError("bad problem line", f"line {lineno}")
            num_vars = int(parts[2])
            continue
        try:
            lits = [int(t) for t in line.split()]
        except ValueError:
            raise GraphFormatError("non-integer literal", f"line {lineno}") from None
        for l in lits:
            if l == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(l)
    if current:
        clauses.append(tuple(current))
    if num_vars is None:
        num_vars = max((abs(l) for c in clauses for l in c), default=0)
    try:
        return CnfFormula(num_vars, tuple(clauses))
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None


def random_3sat(num_vars: int, num_clauses: int, rng: np.random.Generator,
                unsat_core: bool = False) -> CnfFormula:
    """Uniform random 3-CNF; ``unsat_core`` plants all 8 sign patterns on one triple."""
    if num_vars < 3:
        raise ValueError("need at least 3 variables")
    clauses = []
    if unsat_core:
        triple = sorted(int(v) + 1 for v in rng.choice(num_vars, size=3, replace=False))
        for signs in itertools.product((1, -1), repeat=3):
            clauses.append(tuple(s * v for s, v in zip(signs, triple)))
    while len(clauses) < num_clauses:
        vs = rng.choice(num_vars, size=3, replace=False) + 1
        signs = rng.choice((-1, 1), size=3)
        clauses.append(tuple(int(s * v) for s, v in zip(signs, vs)))
    order = rng.permutation(len(clauses))
    return CnfFormula(num_vars, tuple(clauses[i] for i in order))


def sat_to_ldag(f: CnfFormula) -> Ldag:
    """Encode a 3-CNF so the graph is imitable exactly when the formula is unsatisfiable.

    A chain ``S0 -> S1 -> ... -> Sm -> Y`` confounds the action.  The link
    into ``Si`` is cut under every assignment of clause i's variables that
    falsifies it, and ``S0 -> X`` is cut when ``I_X=1``.
    """
    k, m = f.num_vars, len(f.clauses)
    w = [f"W{i}" for i in range(1, k + 1)]
    s = [f"S{i}" for i in range(m + 1)]
    names = ["I_X"] + w + s + ["X", "Y"]
    edges = [("I_X", "X"), ("S0", "X", [{"I_X": "1"}])]
    for i, clause in enumerate(f.clauses, start=1):
        falsify = {f"W{abs(l)}": "0" if l > 0 else "1" for l in clause}
        edges.append((f"S{i-1}", f"S{i}", [falsify]))
        for l in sorted(clause, key=abs):
            edges.append((f"W{abs(l)}", f"S{i}"))
    edges += [(s[-1], "Y"), ("X", "Y")]
    return build_ldag(names, edges, policy_scope=["I_X"], latent=w + s,
                      meta={"cnf": f.to_dimacs()})


# -- sales model --------------------------------------------------------

def sales_scm() -> DiscreteScm:
    """Pricing model: recession C, tax flag T, latent demand U1, price X, sales S, profit Y.

    CPT rows for S under C=1 are not pinned down by the model description;
    they are uniform and listed in ``flags``.  The reward ignores S when C=1
    so those rows do not influence any reward quantity.
    """
    g = sales_graph()
    be = lambda p: [1 - p, p]
    x_table = np.array([[be(0.7), be(0.7)],      # T=0, U1=0/1
                        [be(0.0), be(1.0)]])     # T=1, U1=0/1
    s_table = np.empty((2, 2, 2, 2))             # C, X, U1, S
    for xv in range(2):
        for uv in range(2):
            s_table[0, xv, uv] = be(1.0 if xv == uv else 0.0)
            s_table[1, xv, uv] = [0.5, 0.5]
    y_table = np.array([[[0.8, 0.1, 0.1], [0.05, 0.2, 0.75]],   # C=0, S=0/1
                        [[0.2, 0.5, 0.3], [0.2, 0.5, 0.3]]])    # C=1
    cpts = {
        "C": Cpt("C", (), be(0.05)),
        "T": Cpt("T", (), be(0.4)),
        "U1": Cpt("U1", (), be(0.8)),
        "X": Cpt("X", ("T", "U1"), x_table),
        "S": Cpt("S", ("C", "X", "U1"), s_table),
        "Y": Cpt("Y", ("C", "S"), y_table),
    }
    flags = [f"S|C=1,X={a},U1={b}: unspecified, uniform" for a in "01" for b in "01"]
    return DiscreteScm(g, cpts, flags)
