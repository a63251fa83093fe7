import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csi_imitation.errors import AbsoluteContinuityError, ResourceLimitError, ZeroMassContext
from csi_imitation.gallery import pricing_recession
from csi_imitation.generators import random_scm_for_ldag, sales_scm
from csi_imitation.ldag import PartialAssignment, build_ldag
from csi_imitation.oracles import enumerate_reward
from csi_imitation.policy import PolicyTable, conditional_policy
from csi_imitation.scm import (Cpt, Dataset, DiscreteScm, condition, estimate_joint, expected_value,
                               interventional, joint_distribution, kl_divergence, marginal,
                               observational, reward_distribution, sample, validate_csi)

from .strategies import small_ldags

# exact reward distribution of the sales model under the expert, by enumeration
SALES_EXPERT_Y = [0.21995, 0.19334, 0.58671]
SALES_EXPERT_EY = 1.36676
# reward under pi(x) = P(x) (equivalently P(x | t))
SALES_CLONE_Y = [0.31115, 0.18118, 0.50767]
SALES_CLONE_KL = 0.02116046989462


def coin(p):
    g = build_ldag(["X", "Y"], [])
    return DiscreteScm(g, {"X": Cpt("X", (), [1 - p, p]), "Y": Cpt("Y", (), [0.5, 0.5])})


class TestCpt:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            Cpt("A", (), [0.5, 0.6])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Cpt("A", (), [1.5, -0.5])

    def test_parent_mismatch(self):
        g = build_ldag(["X", "Y"], [("X", "Y")])
        with pytest.raises(ValueError, match="parents"):
            DiscreteScm(g, {"X": Cpt("X", (), [0.5, 0.5]), "Y": Cpt("Y", (), [0.5, 0.5])})


class TestJoint:
    def test_single_bernoulli(self):
        t = joint_distribution(coin(0.3)).marginal(["X"])
        assert np.allclose(t.probs, [0.7, 0.3])

    def test_two_fair_coins(self):
        t = joint_distribution(coin(0.5))
        assert np.allclose(t.probs, 0.25)

    def test_marginal_full_scope_is_identity(self, sales):
        t = joint_distribution(sales)
        assert np.array_equal(marginal(t, t.scope).probs, t.probs)

    def test_sales_marginals(self, sales):
        t = joint_distribution(sales)
        assert t.marginal(["C"]).probs[1] == pytest.approx(0.05, abs=1e-15)
        assert condition(t, {"T": "1"}).marginal(["X"]).probs[1] == pytest.approx(0.8, abs=1e-12)
        assert np.allclose(condition(t, {"C": "1"}).marginal(["Y"]).probs, [0.2, 0.5, 0.3], atol=1e-12)

    def test_zero_mass(self):
        t = joint_distribution(coin(0.0))
        with pytest.raises(ZeroMassContext):
            t.condition({"X": "1"})

    def test_cap(self, sales):
        with pytest.raises(ResourceLimitError):
            joint_distribution(sales, cap=10)

    def test_expert_reward(self, sales):
        y = reward_distribution(sales)
        assert np.allclose(y, SALES_EXPERT_Y, atol=1e-12)
        assert expected_value(joint_distribution(sales).marginal(["Y"]), {"0": 0, "1": 1, "2": 2}) == \
            pytest.approx(SALES_EXPERT_EY, abs=1e-12)


class TestInterventions:
    def test_point_do_in_chain(self):
        g = build_ldag(["X", "Y"], [("X", "Y")])
        m = DiscreteScm(g, {"X": Cpt("X", (), [0.5, 0.5]), "Y": Cpt("Y", ("X",), [[0.9, 0.1], [0.2, 0.8]])})
        t = interventional(m, PartialAssignment({"X": "1"}))
        assert np.allclose(t.marginal(["Y"]).probs, [0.2, 0.8])

    def test_cloning_policy_on_sales(self, sales):
        pi = conditional_policy(sales.graph, observational(sales), ["T"])
        y = reward_distribution(sales, pi)
        assert np.allclose(y, SALES_CLONE_Y, atol=1e-12)
        assert kl_divergence(SALES_EXPERT_Y, y) == pytest.approx(SALES_CLONE_KL, abs=1e-12)

    def test_conditional_policy_restores_joint(self):
        g = build_ldag(["Z", "X", "Y"], [("Z", "X"), ("X", "Y"), ("Z", "Y")])
        m = random_scm_for_ldag(g, 3)
        pi = conditional_policy(g, observational(m), ["Z"])
        assert np.allclose(interventional(m, pi).probs, joint_distribution(m).probs, atol=1e-14)

    def test_scope_outside_policy_scope(self, sales):
        g = sales.graph
        pi = PolicyTable(g.action, ("S",), (g.domain("S"),), g.domain("X"), np.full((2, 2), 0.5))
        with pytest.raises(ValueError):
            interventional(sales, pi)

    @given(small_ldags(), st.integers(0, 2 ** 31 - 1), st.data())
    def test_point_do_matches_enumerator(self, g, seed, data):
        m = random_scm_for_ldag(g, seed)
        xv = data.draw(st.sampled_from(g.domain(g.action)))
        # a policy that always picks xv is the point intervention
        row = np.eye(len(g.domain(g.action)))[g.domain(g.action).index(xv)]
        pi = PolicyTable(g.action, (), (), g.domain(g.action), row)
        got = interventional(m, {g.action: xv}).marginal([g.reward]).probs
        assert np.allclose(got, enumerate_reward(m, pi), atol=1e-12)

    @given(small_ldags(), st.integers(0, 2 ** 31 - 1), st.integers(0, 2 ** 31 - 1))
    def test_policy_leaves_non_descendants_alone(self, g, seed, pseed):
        m = random_scm_for_ldag(g, seed)
        rng = np.random.default_rng(pseed)
        scope = g.policy_scope
        shape = tuple(len(g.domain(v)) for v in scope)
        pi = PolicyTable(g.action, scope, tuple(g.domain(v) for v in scope), g.domain(g.action),
                         rng.dirichlet(np.ones(len(g.domain(g.action))), size=shape))
        nd = [v for v in g.names if v not in g.descendants([g.action])]
        got = interventional(m, pi).marginal(nd).reorder(nd).probs
        want = joint_distribution(m).marginal(nd).reorder(nd).probs
        assert np.allclose(got, want, atol=1e-12)


class TestValidation:
    def test_sales_model_is_consistent(self, sales):
        assert validate_csi(sales) == []

    def test_perturbed_row_detected(self, sales):
        table = sales.cpts["X"].table.copy()
        table[0, 1] = [0.4, 0.6]     # T=0, U1=1
        cpts = dict(sales.cpts, X=Cpt("X", ("T", "U1"), table))
        bad = validate_csi(DiscreteScm(sales.graph, cpts))
        assert len(bad) == 1
        assert (bad[0].source, bad[0].target) == ("U1", "X")
        assert bad[0].distance == pytest.approx(0.1)

    def test_unlabeled_model(self):
        assert validate_csi(coin(0.2)) == []

    @given(small_ldags(), st.integers(0, 2 ** 31 - 1), st.sampled_from([2, 3]))
    def test_generated_models_pass(self, g, seed, k):
        assert validate_csi(random_scm_for_ldag(g, seed, domain_size=k)) == []


class TestSerialization:
    def test_round_trip(self, sales):
        again = DiscreteScm.from_json(sales.to_json())
        assert again.flags == sales.flags
        for n in sales.graph.names:
            assert np.array_equal(again.cpts[n].table, sales.cpts[n].table)

    def test_row_keys(self, sales):
        d = sales.to_dict()
        assert "T=0,U1=1" in d["cpts"]["X"]["rows"]
        assert "" in d["cpts"]["C"]["rows"]


class TestSampling:
    def test_seed_stable(self, sales):
        a, b = sample(sales, 500, 7), sample(sales, 500, 7)
        assert a.to_csv() == b.to_csv()

    def test_single_record(self, sales):
        d = sample(sales, 1, 0)
        t = estimate_joint(d, ["C", "T"])
        assert len(d) == 1 and sorted(t.probs.ravel().tolist()) == [0, 0, 0, 1]

    def test_large_sample_frequency(self, sales):
        n = 10 ** 6
        p = estimate_joint(sample(sales, n, 0), ["C"]).probs[1]
        assert abs(p - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / n)

    def test_smoothing(self, sales):
        t = estimate_joint(sample(sales, 1, 0), ["C"], alpha=1.0)
        assert np.all(t.probs > 0)

    def test_csv_round_trip(self, sales):
        d = sample(sales, 50, 1)
        back = Dataset.from_csv(d.to_csv(), sales.graph)
        assert all(np.array_equal(back.columns[n], d.columns[n]) for n in d.names)

    def test_csv_bad_value(self, sales):
        with pytest.raises(ValueError, match="line 2"):
            Dataset.from_csv("C,T\n7,0\n", sales.graph)


class TestMetrics:
    def test_kl_closed_form(self):
        want = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(want, abs=1e-15)
        assert want == pytest.approx(0.14384, abs=1e-5)

    def test_kl_zero(self):
        assert kl_divergence([0.2, 0.8], [0.2, 0.8]) == 0.0

    def test_absolute_continuity(self):
        with pytest.raises(AbsoluteContinuityError):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.data())
    def test_kl_nonnegative(self, p, data):
        q = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(p), max_size=len(p)))
        p, q = np.array(p) / sum(p), np.array(q) / sum(q)
        d = kl_divergence(p, q)
        assert d >= -1e-15
        if np.max(np.abs(p - q)) > 1e-6:
            assert d > 0
