"""Experiment orchestration: settings, matched multi-trial runs, sweeps and
policy analysis, with CSV/JSON emitters."""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .agents import SOSAgent, TrainConfig
from .baselines import BASELINES, make_baseline
from .epidemic import EpidemicParams, run_episode
from .graph import ContactNetwork, betweenness, remove_edges, remove_node_edges, spectral_radius

POLICIES = ("rl", "random", "maxdegree", "eigenvalue", "none")

SUMMARY_COLUMNS = (
    "policy", "network", "n", "beta", "gamma", "k", "T", "trials",
    "mean_total_reward", "stderr", "mean_improvement_vs_none", "stderr_improvement",
    "std_total_reward", "std_improvement",
)
ANALYSIS_COLUMNS = ("node_id", "pick_count", "frequency", "degree", "betweenness")


class SettingsError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int
    gamma: float = 0.05
    beta_multiplier: float = 10.0
    budget_fraction: float = 0.1
    T: int = 100
    trials: int = 30
    policy: str = "random"
    init_infect_prob: float = 0.5
    network: str = "graph"
    train: TrainConfig | None = None

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.init_infect_prob <= 1.0:
            raise ValueError("init_infect_prob must lie in [0, 1]")
        if self.beta_multiplier < 0:
            raise ValueError("beta_multiplier must be >= 0")
        if not 0.0 < self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in (0, 1]")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.train is not None:
            d["train"] = {k: (list(v) if isinstance(v, tuple) else v)
                          for k, v in asdict(self.train).items()}
        return d

    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return f"sha256={hashlib.sha256(text.encode()).hexdigest()[:16]} {text}"


@dataclass
class TrialResult:
    total_reward: int
    rewards: list[int]
    pick_counts: np.ndarray
    final_infected: int
    baseline_total: int

    @property
    def improvement(self) -> int:
        return self.total_reward - self.baseline_total


@dataclass
class ExperimentResult:
    policy: str
    network: str
    n: int
    beta: float
    gamma: float
    k: int
    T: int
    trials: list[TrialResult] = field(default_factory=list)

    def summary(self) -> dict:
        totals = np.array([t.total_reward for t in self.trials], dtype=np.float64)
        imps = np.array([t.improvement for t in self.trials], dtype=np.float64)
        return {
            "policy": self.policy, "network": self.network, "n": self.n,
            "beta": self.beta, "gamma": self.gamma, "k": self.k, "T": self.T,
            "trials": len(self.trials),
            "mean_total_reward": float(np.mean(totals)),
            "stderr": _stderr(totals),
            "mean_improvement_vs_none": float(np.mean(imps)),
            "stderr_improvement": _stderr(imps),
            "std_total_reward": _std(totals),
            "std_improvement": _std(imps),
        }

    @property
    def pick_counts(self) -> np.ndarray:
        return np.sum([t.pick_counts for t in self.trials], axis=0)

    def to_json(self, config: ExperimentConfig | None = None) -> str:
        doc = {
            "policy": self.policy, "network": self.network, "n": self.n, "beta": self.beta,
            "gamma": self.gamma, "k": self.k, "T": self.T,
            "totals": [t.total_reward for t in self.trials],
            "improvements": [t.improvement for t in self.trials],
            "final_infected": [t.final_infected for t in self.trials],
            "pick_counts": self.pick_counts.tolist(),
        }
        if config is not None:
            doc["config"] = config.to_dict()
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def _stderr(x: np.ndarray) -> float:
    return _std(x) / math.sqrt(x.size) if x.size > 1 else 0.0


# ---------------------------------------------------------------------------
# settings and policies
# ---------------------------------------------------------------------------

def derive_settings(net: ContactNetwork, config: ExperimentConfig) -> tuple[float, int]:
    """Transmission rate as a multiple of the epidemic threshold, and budget."""
    lam = spectral_radius(net)
    if lam <= 0.0:
        raise SettingsError("spectral radius is zero; beta is undefined for an edgeless graph")
    beta = config.beta_multiplier * config.gamma / lam
    if beta > 1.0:
        raise SettingsError(f"derived beta={beta:.6g} exceeds 1 (spectral radius {lam:.6g})")
    k = max(1, int(math.floor(config.budget_fraction * net.n)))
    return beta, k


def beta_from_inverse_radius(gamma: float, inv_radius: float, multiplier: float = 10.0) -> float:
    return multiplier * gamma * inv_radius


def build_policy(name: str, policy_net: ContactNetwork, params: EpidemicParams, k: int,
                 config: ExperimentConfig, env_net: ContactNetwork | None = None):
    """Fit the named policy on the graph the policy is allowed to see."""
    if name == "rl":
        if config.train is None:
            raise ValueError("policy 'rl' needs a train configuration")
        agent = SOSAgent.from_config(config.train, random_state=config.seed)
        return agent.fit(policy_net, params, k, config.T)
    if name not in BASELINES:
        raise ValueError(f"unknown policy {name!r}")
    return make_baseline(name, policy_net)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def _run_trial(net, params, policy, none_policy, T, k, seed, view) -> TrialResult:
    trace = run_episode(net, params, policy, T, seed, k, policy_network=view)
    base = run_episode(net, params, none_policy, T, seed, k, policy_network=view)
    return TrialResult(trace.total_reward, trace.rewards, trace.pick_counts(net.n),
                       trace.final_infected, base.total_reward)


def run_experiment(net: ContactNetwork, config: ExperimentConfig, policy=None,
                   observed_net: ContactNetwork | None = None,
                   threads: int = 1) -> ExperimentResult:
    """Run ``config.trials`` rollouts of the policy and matched no-intervention
    rollouts. Trial ``i`` uses seed ``(config.seed, i)`` for both, so they
    share the initial state and dynamics stream.

    ``observed_net`` is the graph the policy learns from; beta and k always
    come from the true ``net``.
    """
    beta, k = derive_settings(net, config)
    params = EpidemicParams(beta, config.gamma, config.init_infect_prob)
    view = observed_net if observed_net is not None else net
    if policy is None:
        policy = build_policy(config.policy, view, params, k, config)
    none = make_baseline("none", view)
    seeds = [np.random.SeedSequence([config.seed, i]) for i in range(config.trials)]

    def one(seed):
        return _run_trial(net, params, copy.deepcopy(policy), none, config.T, k, seed, view)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(one, seeds))
    else:
        trials = [one(s) for s in seeds]
    return ExperimentResult(config.policy, config.network, net.n, beta, config.gamma, k,
                            config.T, trials)


def horizon_sweep(net: ContactNetwork, config: ExperimentConfig, horizons: Sequence[int],
                  policies: Sequence[str], threads: int = 1) -> list[dict]:
    if not horizons:
        raise ValueError("horizons must be nonempty")
    rows = []
    for T in horizons:
        for name in policies:
            res = run_experiment(net, replace(config, T=int(T), policy=name), threads=threads)
            rows.append({"kind": "horizon", "value": T, **res.summary()})
    return rows


def observed_network(net: ContactNetwork, mode: str, fraction: float, seed: int,
                     index: int) -> ContactNetwork:
    sub_seed = np.random.SeedSequence([seed, 0x5EED, index])
    if mode == "edge":
        return remove_edges(net, fraction, sub_seed)
    if mode == "node":
        return remove_node_edges(net, fraction, sub_seed)
    raise ValueError(f"mode must be 'edge' or 'node', got {mode!r}")


def robustness_sweep(net: ContactNetwork, config: ExperimentConfig, mode: str,
                     fractions: Sequence[float], policies: Sequence[str],
                     threads: int = 1) -> list[dict]:
    """Policies see a degraded graph; dynamics and evaluation use the true one."""
    rows = []
    for idx, f in enumerate(fractions):
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"fraction {f} outside [0, 1]")
        view = observed_network(net, mode, f, config.seed, idx)
        for name in policies:
            res = run_experiment(net, replace(config, policy=name), observed_net=view,
                                 threads=threads)
            rows.append({"kind": mode, "value": f, **res.summary()})
    return rows


@dataclass
class PolicyAnalysis:
    frequencies: np.ndarray        # sorted descending
    avg_degree: float
    avg_betweenness: float
    rows: list[dict]


def policy_analysis(pick_counts, net: ContactNetwork) -> PolicyAnalysis:
    counts = np.asarray(pick_counts, dtype=np.float64)
    if counts.shape != (net.n,):
        raise ValueError(f"pick counts have shape {counts.shape}, graph has {net.n} nodes")
    total = counts.sum()
    if total <= 0:
        raise ValueError("no picks recorded")
    freq = counts / total
    deg = net.degrees.astype(np.float64)
    btw = betweenness(net)
    rows = [
        {"node_id": v, "pick_count": int(counts[v]), "frequency": float(freq[v]),
         "degree": int(deg[v]), "betweenness": float(btw[v])}
        for v in range(net.n)
    ]
    return PolicyAnalysis(np.sort(freq)[::-1], float(freq @ deg), float(freq @ btw), rows)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str], header: str | None = None) -> str:
    buf = io.StringIO()
    if header is not None:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def summary_csv(rows: Sequence[dict], config: ExperimentConfig, extra: Sequence[str] = ()) -> str:
    return rows_to_csv(rows, (*extra, *SUMMARY_COLUMNS), f"config: {config.fingerprint()}")


def analysis_csv(analysis: PolicyAnalysis, fingerprint: str) -> str:
    return rows_to_csv(analysis.rows, ANALYSIS_COLUMNS, f"config: {fingerprint}")
