import numpy as np
import pytest

from csi_imitation.errors import ZeroMassContext
from csi_imitation.ldag import build_ldag
from csi_imitation.policy import ConditionalLookup, PolicyTable, conditional_policy
from csi_imitation.scm import Cpt, DiscreteScm, observational


def gated():
    # Z=1 never happens
    g = build_ldag(["Z", "X", "Y"], [("Z", "X"), ("X", "Y")])
    m = DiscreteScm(g, {"Z": Cpt("Z", (), [1.0, 0.0]),
                        "X": Cpt("X", ("Z",), [[0.3, 0.7], [0.9, 0.1]]),
                        "Y": Cpt("Y", ("X",), [[1.0, 0.0], [0.0, 1.0]])})
    return g, m


def test_rows_must_be_distributions():
    with pytest.raises(ValueError):
        PolicyTable("X", (), (), ("0", "1"), [0.5, 0.6])
    with pytest.raises(ValueError, match="shape"):
        PolicyTable("X", ("Z",), (("0", "1"),), ("0", "1"), [0.5, 0.5])


def test_uniform():
    g, _ = gated()
    pi = PolicyTable.uniform(g, ["Z"])
    assert pi.scope == ("Z",)
    assert np.allclose(pi.table, 0.5)


def test_conditional_policy_and_uniform_fill():
    g, m = gated()
    pi = conditional_policy(g, observational(m), ["Z"])
    assert np.allclose(pi.row({"Z": "0"}), [0.3, 0.7])
    assert np.allclose(pi.row({"Z": "1"}), [0.5, 0.5])
    assert pi.flags == ("Z=1",)
    assert pi.to_dict()["uniform_rows"] == ["Z=1"]


def test_dict_round_trip():
    g, m = gated()
    pi = conditional_policy(g, observational(m), ["Z"])
    back = PolicyTable.from_dict(pi.to_dict(), g)
    assert np.array_equal(back.table, pi.table) and back.flags == pi.flags


def test_missing_rows():
    g, _ = gated()
    with pytest.raises(ValueError, match="missing"):
        PolicyTable.from_dict({"scope": ["Z"], "rows": {"Z=0": [1, 0]}}, g)


def test_lookup():
    g, m = gated()
    look = ConditionalLookup(observational(m), "X", ["Z"])
    assert look.get({"Z": "1"}) is None
    with pytest.raises(ZeroMassContext):
        look.require({"Z": "1"})


def test_fixed_context():
    g, m = gated()
    pi = conditional_policy(g, observational(m), [], fixed={"Z": "0"})
    assert pi.scope == () and np.allclose(pi.table, [0.3, 0.7])
