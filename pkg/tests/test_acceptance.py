"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run standalone for just the summary lines:

    python3 tests/test_acceptance.py
"""

import sys
import time

import numpy as np
import pytest

from csi_imitation.bench import run_census, run_sales_benchmark
from csi_imitation.gallery import (driving_cruise_control, driving_latent_limit, pricing_chain,
                                   pricing_recession, two_context_graph)
from csi_imitation.generators import CensusConfig, random_ldag, random_scm_for_ldag
from csi_imitation.imitability import Decision, imitate_graphical, parents_closed
from csi_imitation.ldag import (PartialAssignment, context_induced_subgraph, context_specific_dag,
                                context_variables)
from csi_imitation.oracles import dsep_suite, sat_suite, verify_policy
from csi_imitation.policy import conditional_policy
from csi_imitation.scm import interventional, observational
from csi_imitation.surrogate import csi_identify, imitate_with_data

# pinned tolerances and budgets
DECISION_BUDGET_S = 1.0
REWARD_ANCHOR = 1.367
SURROGATE_REWARD_ANCHOR = 1.358
ANCHOR_TOL = 0.02
EXACT_KL_MAX = 1e-6
NAIVE_KL_MIN = 0.01
SAMPLED_POLICY_KL_MAX = 1e-2
SALES_SAMPLES = 100_000
PRICING_BUDGET_S = 5.0
SAT_INSTANCES = 50
SAT_BUDGET_S = 60.0
SOUND_GRAPHS, SOUND_SCMS, SOUND_FAMILY_SCMS = 100, 5, 100
GRAPHICAL_TOL, DATA_TOL = 1e-9, 1e-6
SOUND_BUDGET_S = 120.0
DSEP_GRAPHS, DSEP_QUERIES = 500, 20
CENSUS_NS, CENSUS_SEEDS = (50, 100, 150), 100
CENSUS_BUDGET_S = 600.0
ID_SCMS, ID_TOL = 100, 1e-9


def report(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    return ok


def edges_of(g):
    return {(e.source, e.target, frozenset(frozenset(l.items()) for l in e.labels)) for e in g.edges}


def E(source, target, *labels):
    return source, target, frozenset(frozenset(l.items()) for l in labels)


# -- criteria -----------------------------------------------------------

def check_decisions():
    t0 = time.perf_counter()
    a = imitate_graphical(driving_latent_limit())
    g = driving_cruise_control()
    m = random_scm_for_ldag(g, 0)
    obs = observational(m)
    b = imitate_graphical(g, obs)
    c = imitate_graphical(pricing_recession())
    dt = time.perf_counter() - t0
    ok = (a.decision == Decision.NOT_IMITABLE
          and b.decision == Decision.IMITABLE and b.separator == {"Z", "T"}
          and b.policy.scope == ("Z", "T")
          and np.allclose(b.policy.table, conditional_policy(g, obs, ["Z", "T"]).table, atol=1e-12)
          and c.decision == Decision.NOT_IMITABLE and c.witness == PartialAssignment({"C": "1"})
          and dt < DECISION_BUDGET_S)
    return report("AC1 driving/recession decisions", ok,
                  f"latent-limit={a.decision.value}, cruise={b.decision.value} sep={sorted(b.separator)}, "
                  f"recession={c.decision.value} witness={dict(c.witness)}, {dt:.3f}s < {DECISION_BUDGET_S}s")


def check_induced_subgraphs():
    g = two_context_graph()
    z1 = edges_of(context_induced_subgraph(g, {"Z": "1"}))
    want_z1 = {E("X", "S"), E("U", "X"), E("U", "S"), E("S", "Y"), E("T", "Y"), E("X", "Y", {"T": "0"})}
    both = edges_of(context_induced_subgraph(g, {"T": "0", "Z": "1"}))
    want_both = {E("X", "S"), E("U", "X"), E("U", "S"), E("S", "Y")}
    ok = z1 == want_z1 and both == want_both
    return report("AC2 context-induced subgraphs", ok,
                  f"Z=1: {len(z1)} edges match={z1 == want_z1}; T=0,Z=1: {len(both)} edges match={both == want_both}")


def check_specific_dags():
    g = pricing_chain()
    base = {E("T", "X"), E("X", "S"), E("W", "Y"), E("U1", "S"), E("U1", "X", {"T": "0"}), E("C", "W"),
            E("C", "S"), E("U2", "W"), E("U2", "Y"), E("U3", "Y")}
    c0 = edges_of(context_specific_dag(g, {"C": "0"}))
    c1 = edges_of(context_specific_dag(g, {"C": "1"}))
    # labels incompatible with the context are dropped, the edge stays
    ok0 = c0 == base | {E("S", "W")}
    ok1 = c1 == base | {E("U3", "S")}
    return report("AC3 context-specific DAGs", ok0 and ok1,
                  f"C=0 drops U3->S keeps S->W: {ok0}; C=1 drops S->W keeps U3->S: {ok1}")


def check_pricing_benchmark():
    t0 = time.perf_counter()
    exact = run_sales_benchmark()
    sampled = run_sales_benchmark(SALES_SAMPLES, seed=0, exact=False)
    dt = time.perf_counter() - t0
    m = exact.metrics
    ey = m["expert"]["expected_reward"]
    sur = m["surrogate_policy"]
    n1, n2 = m["naive_marginal"]["kl_reward"], m["naive_conditional"]["kl_reward"]
    pol_kls = [v for name in ("naive_marginal", "naive_conditional", "surrogate_policy")
               for v in sampled.metrics[name]["policy_kl"].values()]
    ok = (abs(ey - REWARD_ANCHOR) <= ANCHOR_TOL
          and sur["kl_reward"] <= EXACT_KL_MAX
          and n1 >= NAIVE_KL_MIN and n2 >= NAIVE_KL_MIN
          and abs(sur["expected_reward"] - SURROGATE_REWARD_ANCHOR) <= ANCHOR_TOL
          and max(pol_kls) < SAMPLED_POLICY_KL_MAX
          and dt < PRICING_BUDGET_S)
    return report("AC4 pricing benchmark", ok,
                  f"E[Y] expert={ey:.5f} surrogate={sur['expected_reward']:.5f}; KL surrogate={sur['kl_reward']:.2e} "
                  f"naive={n1:.4f}/{n2:.4f}; sampled policy KL max={max(pol_kls):.2e}; {dt:.2f}s < {PRICING_BUDGET_S}s")


def check_sat_reduction():
    t0 = time.perf_counter()
    rep = sat_suite(SAT_INSTANCES, seed=0)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.checked == SAT_INSTANCES and dt < SAT_BUDGET_S
    return report("AC5 3-SAT reduction", ok,
                  f"{rep.checked} instances, {len(rep.mismatches)} mismatches, {dt:.2f}s < {SAT_BUDGET_S}s")


def check_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    counts = {"imitable": 0, "other": 0, "bad": 0}
    closed = True
    for _ in range(SOUND_GRAPHS):
        cfg = CensusConfig(n=int(rng.integers(5, 9)), max_degree=3, num_context_vars=int(rng.integers(1, 3)))
        g = random_ldag(cfg, seed=int(rng.integers(2 ** 31)))
        closed &= parents_closed(g, context_variables(g))
        for _ in range(SOUND_SCMS):
            m = random_scm_for_ldag(g, int(rng.integers(2 ** 31)))
            v = imitate_graphical(g, observational(m))
            if v.decision == Decision.IMITABLE:
                counts["imitable"] += 1
                counts["bad"] += not verify_policy(m, v.policy, GRAPHICAL_TOL)
            else:
                counts["other"] += 1
    fam = {}
    for make in (pricing_recession, pricing_chain):
        g = make()
        hits = bad = 0
        for seed in range(SOUND_FAMILY_SCMS):
            m = random_scm_for_ldag(g, seed)
            v = imitate_with_data(g, observational(m))
            if v.decision == Decision.IMITABLE:
                hits += 1
                bad += not verify_policy(m, v.policy, DATA_TOL)
        fam[make.__name__] = (hits, bad)
    dt = time.perf_counter() - t0
    ok = (closed and counts["bad"] == 0 and counts["imitable"] > 0
          and all(h > 0 and b == 0 for h, b in fam.values()) and dt < SOUND_BUDGET_S)
    fam_txt = ", ".join(f"{k} {h}/{SOUND_FAMILY_SCMS} imitable {b} bad" for k, (h, b) in fam.items())
    return report("AC6 soundness", ok,
                  f"graphical: {counts['imitable']} imitable ({counts['other']} not), {counts['bad']} bad at {GRAPHICAL_TOL}; "
                  f"data-assisted: {fam_txt} at {DATA_TOL}; {dt:.1f}s < {SOUND_BUDGET_S}s")


def check_dsep():
    t0 = time.perf_counter()
    rep = dsep_suite(DSEP_GRAPHS, DSEP_QUERIES, seed=0)
    dt = time.perf_counter() - t0
    ok = rep.passed and rep.checked == DSEP_GRAPHS * DSEP_QUERIES
    return report("AC7 d-separation vs path oracle", ok,
                  f"{rep.checked} queries, {len(rep.mismatches)} mismatches, {dt:.2f}s")


def check_census():
    t0 = time.perf_counter()
    res = run_census(CensusConfig(samples=CENSUS_SEEDS), CENSUS_NS, timing=False)
    dt = time.perf_counter() - t0
    s = res.summary
    mono = sum(v["monotonicity_violations"] for v in s.values())
    errors = sum(v["errors"] for v in s.values())
    ok = mono == 0 and errors == 0 and s[100]["gap"] > 0 and dt < CENSUS_BUDGET_S
    fr = "; ".join(f"n={n} classic={v['classic_fraction']:.2f} csi={v['csi_fraction']:.2f}" for n, v in s.items())
    return report("AC8 census", ok, f"{fr}; violations={mono}; gap@100={s[100]['gap']:.2f}; {dt:.1f}s < {CENSUS_BUDGET_S:.0f}s")


def check_identification():
    g = pricing_recession()
    f = csi_identify(g, ["S"], {})
    worst = 0.0
    for seed in range(ID_SCMS):
        m = random_scm_for_ldag(g, seed)
        obs = observational(m)
        for xv in g.domain("X"):
            truth = interventional(m, {"X": xv}).marginal(["S"]).probs
            for cv in g.domain("C"):
                got = f.evaluate(g, obs, xv, PartialAssignment({"C": cv}))
                worst = max(worst, float(np.max(np.abs(got - truth))))
    ok = f.describe() == "P(S | x,C=0)" and worst <= ID_TOL
    return report("AC9 transport formula vs engine", ok,
                  f"{f.describe()} on {ID_SCMS} models, max error {worst:.1e} <= {ID_TOL}")


CHECKS = [check_decisions, check_induced_subgraphs, check_specific_dags, check_pricing_benchmark,
          check_sat_reduction, check_soundness, check_dsep, check_census, check_identification]


@pytest.mark.parametrize("check", CHECKS, ids=[c.__name__ for c in CHECKS])
def test_acceptance(check, capsys):
    with capsys.disabled():
        assert check()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    sys.exit(0 if all(results) else 1)
