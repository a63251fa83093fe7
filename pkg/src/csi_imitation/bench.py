"""Experiment pipelines: random-graph census and the pricing benchmark."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ResourceLimitError
from .generators import CensusConfig, random_ldag, sales_scm
from .imitability import DEFAULT_CONTEXT_CAP, Decision, check_all_contexts, find_sep
from .policy import PolicyTable, conditional_policy
from .scm import (estimate_joint, expected_value, interventional, joint_distribution,
                  kl_divergence, observational, sample)
from .surrogate import imitate_with_data

CENSUS_COLUMNS = ("n", "seed", "classic_imitable", "csi_imitable", "contexts_checked", "wall_ms")


# -- census -------------------------------------------------------------

def census_instance(cfg: CensusConfig, seed: int, cap: int = DEFAULT_CONTEXT_CAP,
                    timing: bool = True) -> dict:
    """Classic (labels stripped) and context-aware decisions for one random graph."""
    start = time.perf_counter()
    g = random_ldag(cfg, seed=seed)
    row = {"n": cfg.n, "seed": seed}
    row["classic_imitable"] = find_sep(g.strip_labels()) is not None
    try:
        seps = check_all_contexts(g, cap)
        row["csi_imitable"] = all(z is not None for z in seps.values())
        row["contexts_checked"] = len(seps)
    except ResourceLimitError:
        row["csi_imitable"] = "error"
        row["contexts_checked"] = 0
    row["wall_ms"] = round((time.perf_counter() - start) * 1000, 3) if timing else 0
    return row


def _census_job(args):
    return census_instance(*args)


@dataclass
class CensusResult:
    rows: List[dict]
    summary: Dict[int, dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CENSUS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _csv_value(r[k]) for k in CENSUS_COLUMNS})
        return buf.getvalue()

    def plot_data(self) -> List[dict]:
        return [{"n": n, "classic_fraction": s["classic_fraction"], "csi_fraction": s["csi_fraction"]}
                for n, s in self.summary.items()]

    def to_dict(self) -> dict:
        return {"summary": {str(n): s for n, s in self.summary.items()}}


def _csv_value(v):
    if isinstance(v, bool):
        return int(v)
    return v


def run_census(cfg: CensusConfig, ns: Optional[Sequence[int]] = None, threads: int = 1,
               cap: int = DEFAULT_CONTEXT_CAP, timing: bool = True) -> CensusResult:
    """Evaluate ``cfg.samples`` random graphs per vertex count.

    Seeds are ``cfg.seed, cfg.seed + 1, ...`` for every ``n``.  Workers, if
    any, only change wall-clock columns; rows come back in seed order.
    """
    ns = list(ns) if ns is not None else [cfg.n]
    jobs = [(replace(cfg, n=n), cfg.seed + i, cap, timing) for n in ns for i in range(cfg.samples)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_census_job, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        rows = [_census_job(j) for j in jobs]
    summary = {}
    for n in ns:
        mine = [r for r in rows if r["n"] == n]
        ok = [r for r in mine if r["csi_imitable"] != "error"]
        classic = sum(bool(r["classic_imitable"]) for r in ok)
        csi = sum(bool(r["csi_imitable"]) for r in ok)
        summary[n] = {
            "instances": len(mine),
            "errors": len(mine) - len(ok),
            "classic_fraction": classic / len(ok) if ok else float("nan"),
            "csi_fraction": csi / len(ok) if ok else float("nan"),
            "gap": (csi - classic) / len(ok) if ok else float("nan"),
            "monotonicity_violations": sum(1 for r in ok if r["classic_imitable"] and not r["csi_imitable"]),
        }
    return CensusResult(rows, summary)


# -- pricing benchmark ---------------------------------------------------

REWARD_VALUES = {"0": 0.0, "1": 1.0, "2": 2.0}


@dataclass
class ExperimentReport:
    config: dict
    mode: dict
    metrics: Dict[str, dict]
    runtime_s: float
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)


def _reward_metrics(m, policy) -> dict:
    g = m.graph
    expert = joint_distribution(m).marginal([g.reward])
    got = expert if policy is None else interventional(m, policy).marginal([g.reward])
    return {"expected_reward": expected_value(got, REWARD_VALUES),
            "kl_reward": kl_divergence(expert, got)}


def _policy_by(var: str, m, pi: PolicyTable) -> Dict[str, np.ndarray]:
    """pi(x | var=v), mixing other scope variables with their true weights given ``var``."""
    g = m.graph
    joint = joint_distribution(m)
    out = {}
    for v in g.domain(var):
        others = [s for s in pi.scope if s != var]
        acc = np.zeros(len(g.domain(g.action)))
        weights = joint.marginal(set(others) | {var}).condition({var: v}) if others else None
        for pa, dist in pi.rows():
            if var in pa and pa[var] != v:
                continue
            w = weights.slice(pa.restrict(others)).total if others else 1.0
            acc += w * dist
        out[v] = acc
    return out


def run_sales_benchmark(n_samples: Optional[int] = None, seed: int = 0, exact: bool = True,
                        context_var: str = "T") -> ExperimentReport:
    """Expert, two cloning baselines and the surrogate-based policy on the pricing model.

    Exact mode derives every policy from the exact P(O).  Otherwise policies
    are re-derived from ``n_samples`` draws and compared with their exact
    counterparts per value of ``context_var``.  Reward metrics are always
    computed with the exact engine.
    """
    start = time.perf_counter()
    m = sales_scm()
    g = m.graph
    obs = observational(m)
    builders = {
        "naive_marginal": lambda o: conditional_policy(g, o, []),
        "naive_conditional": lambda o: conditional_policy(g, o, [context_var]),
        "surrogate_policy": lambda o: imitate_with_data(g, o),
    }
    metrics = {"expert": dict(_reward_metrics(m, None), decision="n/a")}
    notes = list(m.flags)
    exact_policies = {}
    for name, build in builders.items():
        out = build(obs)
        if hasattr(out, "decision"):
            metrics[name] = {"decision": out.decision.value}
            out = out.policy
        else:
            metrics[name] = {"decision": "n/a"}
        exact_policies[name] = out
    if exact:
        mode = {"mode": "exact-enumeration"}
        for name, pi in exact_policies.items():
            if pi is not None:
                metrics[name].update(_reward_metrics(m, pi))
                metrics[name]["policy"] = pi.to_dict()
    else:
        if not n_samples:
            raise ValueError("finite-sample mode needs n_samples")
        mode = {"mode": "finite-sample", "n": int(n_samples), "seed": int(seed)}
        data = sample(m, n_samples, seed)
        est = estimate_joint(data, g.observed)
        for name, build in builders.items():
            out = build(est)
            if hasattr(out, "decision"):
                metrics[name]["decision_sampled"] = out.decision.value
                notes += out.notes
                out = out.policy
            if out is None:
                continue
            metrics[name].update(_reward_metrics(m, out))
            metrics[name]["policy"] = out.to_dict()
            truth = _policy_by(context_var, m, exact_policies[name])
            guess = _policy_by(context_var, m, out)
            metrics[name]["policy_kl"] = {f"{context_var}={v}": kl_divergence(truth[v], guess[v])
                                          for v in g.domain(context_var)}
    config = {"n_samples": n_samples, "seed": seed, "exact": exact, "context_var": context_var,
              "model": "pricing model over C, T, U1 (latent), X, S, Y (ternary, latent)"}
    return ExperimentReport(config, mode, metrics, time.perf_counter() - start, notes)
