"""Small named graphs used in examples, tests and the benchmark."""

from __future__ import annotations

from .ldag import Ldag, build_ldag


def driving_latent_limit() -> Ldag:
    """Speed limit S is latent and drives both the action and the reward."""
    return build_ldag(
        ["Z", "T", "S", "X", "Y"],
        [("X", "Y"), ("Z", "Y"), ("Z", "X"), ("Z", "T"), ("T", "X"),
         ("S", "X"), ("S", "Y"), ("Z", "S")],
        policy_scope=["Z", "T"], latent=["S", "Y"])


def driving_cruise_control() -> Ldag:
    """As :func:`driving_latent_limit` without the S -> X edge."""
    return build_ldag(
        ["Z", "T", "S", "X", "Y"],
        [("X", "Y"), ("Z", "Y"), ("Z", "X"), ("Z", "T"), ("T", "X"),
         ("S", "Y"), ("Z", "S")],
        policy_scope=["Z", "T"], latent=["S", "Y"])


def driving_heavy_traffic() -> Ldag:
    """The S -> X edge vanishes when traffic T is heavy (T=1)."""
    return build_ldag(
        ["Z", "T", "S", "X", "Y"],
        [("X", "Y"), ("Z", "Y"), ("Z", "X"), ("Z", "T"), ("T", "X"),
         ("S", "X", [{"T": "1"}]), ("S", "Y"), ("Z", "S")],
        policy_scope=["Z", "T"], latent=["S", "Y"])


def two_context_graph() -> Ldag:
    """Two context variables, Z gating U -> X and T gating X -> Y."""
    return build_ldag(
        ["Z", "T", "U", "X", "S", "Y"],
        [("Z", "X"), ("X", "S"), ("U", "X", [{"Z": "0"}]), ("U", "S"),
         ("S", "Y"), ("T", "Y"), ("X", "Y", [{"T": "0"}])],
        latent=["U", "Y"])


def pricing_recession() -> Ldag:
    """Confounder U reaches X only outside recession (C=1)."""
    return build_ldag(
        ["C", "U", "X", "S", "Y"],
        [("C", "X"), ("X", "S"), ("U", "X", [{"C": "0"}]), ("U", "S"), ("S", "Y")],
        policy_scope=["C"], latent=["U", "Y"])


def pricing_chain() -> Ldag:
    """Two observed contexts T and C with three latent confounders."""
    return build_ldag(
        ["T", "C", "U1", "U2", "U3", "X", "S", "W", "Y"],
        [("T", "X"), ("X", "S"), ("S", "W", [{"C": "1"}]), ("W", "Y"),
         ("U1", "S"), ("U1", "X", [{"T": "0"}]), ("C", "W"), ("C", "S"),
         ("U2", "W"), ("U2", "Y"), ("U3", "Y"), ("U3", "S", [{"C": "0"}])],
        policy_scope=["T", "C"], latent=["U1", "U2", "U3", "Y"])


def sales_graph() -> Ldag:
    """Six-variable pricing model with ternary reward (see ``generators.sales_scm``)."""
    return build_ldag(
        ["C", "T", "U1", "X", "S", "Y"],
        [("T", "X"), ("U1", "X", [{"T": "0"}]), ("C", "S"), ("X", "S"), ("U1", "S"),
         ("C", "Y"), ("S", "Y", [{"C": "1"}])],
        policy_scope=["C", "T"], latent=["U1", "Y"], domains={"Y": ("0", "1", "2")})


def gated_confounder() -> Ldag:
    """U confounds X only when C=1 and Y only when C=0."""
    return build_ldag(
        ["C", "U", "X", "Y"],
        [("C", "X"), ("C", "Y"), ("U", "X", [{"C": "0"}]), ("U", "Y", [{"C": "1"}]), ("X", "Y")],
        policy_scope=["C"], latent=["U", "Y"])


GALLERY = {
    "driving_latent_limit": driving_latent_limit,
    "driving_cruise_control": driving_cruise_control,
    "driving_heavy_traffic": driving_heavy_traffic,
    "two_context_graph": two_context_graph,
    "pricing_recession": pricing_recession,
    "pricing_chain": pricing_chain,
    "sales_graph": sales_graph,
    "gated_confounder": gated_confounder,
}
