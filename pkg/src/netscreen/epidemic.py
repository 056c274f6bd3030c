"""Discrete-time network SIS dynamics with active and passive screening.

One round ``t`` runs in a fixed order:

1. active screening cures every infected node in the action,
2. the reward counts susceptible nodes,
3. transmission: each infected node infects each susceptible neighbour
   independently with probability ``beta`` (against pre-transmission labels),
4. passive screening cures each infected node with probability ``gamma``;
   those nodes form the observation revealed at the start of round ``t+1``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from ._validation import check_node_set, check_probability, make_rng
from .graph import ContactNetwork


class PolicyError(RuntimeError):
    """A policy returned an over-budget or infeasible action."""


@dataclass(frozen=True)
class EpidemicParams:
    beta: float
    gamma: float
    init_infect_prob: float = 0.5

    def __post_init__(self):
        check_probability(self.beta, "beta")
        check_probability(self.gamma, "gamma")
        check_probability(self.init_infect_prob, "init_infect_prob")


@dataclass(frozen=True)
class HealthState:
    """True per-node labels; ``True`` marks an infected node."""

    infected: np.ndarray
    t: int = 0

    @property
    def n(self) -> int:
        return self.infected.size

    def as_vector(self) -> np.ndarray:
        return self.infected.astype(np.float64)

    def infected_count(self) -> int:
        return int(self.infected.sum())


@dataclass(frozen=True)
class StepOutcome:
    observation: frozenset[int]
    reward: int
    next_state: HealthState


def init_state(net: ContactNetwork, params: EpidemicParams, seed) -> HealthState:
    rng = make_rng(seed)
    return HealthState(rng.random(net.n) < params.init_infect_prob, t=0)


def reward_of(state: HealthState) -> int:
    return int(state.n - state.infected.sum())


def step(
    net: ContactNetwork,
    state: HealthState,
    action: Iterable[int],
    params: EpidemicParams,
    rng: np.random.Generator,
) -> StepOutcome:
    """Advance one round. ``rng`` always consumes ``2|E| + n`` uniforms so that
    rollouts under different actions stay on common random numbers."""
    action = check_node_set(action, net.n)
    src, dst = net.arcs
    u_arc = rng.random(src.size)
    u_cure = rng.random(net.n)

    infected = state.infected.copy()
    if action:
        infected[list(action)] = False
    reward = int(net.n - infected.sum())

    hits = infected[src] & ~infected[dst] & (u_arc < params.beta)
    newly = np.zeros(net.n, dtype=bool)
    newly[dst[hits]] = True
    infected |= newly

    cured = infected & (u_cure < params.gamma)
    infected &= ~cured
    observation = frozenset(np.flatnonzero(cured).tolist())
    return StepOutcome(observation, reward, HealthState(infected, state.t + 1))


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundInfo:
    """What a policy may see at the start of a round."""

    t: int
    observation: frozenset[int]
    last_action: frozenset[int]
    k: int
    network: ContactNetwork

    @property
    def feasible(self) -> frozenset[int]:
        return frozenset(range(self.network.n)) - self.observation


class Policy(Protocol):
    def reset(self, k: int, rng: np.random.Generator) -> None: ...

    def act(self, info: RoundInfo) -> Iterable[int]: ...


class SISEnvironment:
    """Stateful wrapper around :func:`step` that audits ground-truth reads.

    ``truth_reads`` counts every call to :meth:`true_labels`; evaluation code
    never calls it, which the curriculum acceptance check relies on.
    """

    def __init__(self, net: ContactNetwork, params: EpidemicParams):
        self.net = net
        self.params = params
        self.truth_reads = 0
        self._state: HealthState | None = None
        self._rng: np.random.Generator | None = None
        self.observation: frozenset[int] = frozenset()

    def reset(self, init_seed, dynamics_seed, state: HealthState | None = None) -> frozenset[int]:
        self._state = state if state is not None else init_state(self.net, self.params, init_seed)
        self._rng = make_rng(dynamics_seed)
        self.observation = frozenset()
        return self.observation

    @property
    def t(self) -> int:
        return self._state.t

    def true_labels(self) -> np.ndarray:
        self.truth_reads += 1
        return self._state.as_vector()

    def infected_count(self) -> int:
        return self._state.infected_count()

    def step(self, action: Iterable[int]) -> StepOutcome:
        out = step(self.net, self._state, action, self.params, self._rng)
        self._state = out.next_state
        self.observation = out.observation
        return out


@dataclass(frozen=True)
class StepRecord:
    t: int
    observation: frozenset[int]
    action: frozenset[int]
    reward: int
    infected_count: int


@dataclass
class EpisodeTrace:
    steps: list[StepRecord] = field(default_factory=list)
    truth_reads: int = 0

    @property
    def rewards(self) -> list[int]:
        return [s.reward for s in self.steps]

    @property
    def total_reward(self) -> int:
        return sum(s.reward for s in self.steps)

    @property
    def final_infected(self) -> int:
        return self.steps[-1].infected_count if self.steps else 0

    def pick_counts(self, n: int) -> np.ndarray:
        counts = np.zeros(n, dtype=np.int64)
        for s in self.steps:
            for v in s.action:
                counts[v] += 1
        return counts

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "num_observed", "action_ids", "reward", "true_infected_count"])
        for s in self.steps:
            w.writerow([s.t, len(s.observation), ";".join(map(str, sorted(s.action))),
                        s.reward, s.infected_count])
        return buf.getvalue()


class _CallablePolicy:
    def __init__(self, fn: Callable[[RoundInfo], Iterable[int]]):
        self.fn = fn

    def reset(self, k, rng):
        pass

    def act(self, info):
        return self.fn(info)


def as_policy(policy) -> Policy:
    if hasattr(policy, "act"):
        return policy
    if callable(policy):
        return _CallablePolicy(policy)
    raise TypeError(f"not a policy: {policy!r}")


def episode_seeds(seed) -> Sequence[np.random.SeedSequence]:
    """Split an episode seed into (initial state, dynamics, policy) streams.

    ``SeedSequence.spawn`` advances a counter on the parent, so the children
    are built from the spawn key directly; the same seed always gives the
    same three streams.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,),
                                   pool_size=ss.pool_size) for i in range(3)]


def run_episode(
    net: ContactNetwork,
    params: EpidemicParams,
    policy,
    T: int,
    seed,
    k: int = 1,
    *,
    policy_network: ContactNetwork | None = None,
    initial_state: HealthState | None = None,
) -> EpisodeTrace:
    """Roll out rounds ``t = 0..T`` and record what happened.

    ``policy_network`` is the graph shown to the policy; it defaults to the
    true network and differs only in structural-uncertainty experiments.
    """
    if T < 0:
        raise ValueError(f"horizon T must be >= 0, got {T}")
    policy = as_policy(policy)
    init_ss, dyn_ss, pol_ss = episode_seeds(seed)
    env = SISEnvironment(net, params)
    obs = env.reset(init_ss, dyn_ss, initial_state)
    policy.reset(k, make_rng(pol_ss))
    view = policy_network if policy_network is not None else net
    trace = EpisodeTrace()
    last = frozenset()
    for t in range(T + 1):
        info = RoundInfo(t, obs, last, k, view)
        try:
            action = check_node_set(policy.act(info), net.n)
        except ValueError as exc:
            raise PolicyError(f"round {t}: {exc}") from exc
        if len(action) > k:
            raise PolicyError(f"round {t}: action of size {len(action)} exceeds budget {k}")
        if action & obs:
            raise PolicyError(
                f"round {t}: action screens passively observed nodes {sorted(action & obs)}"
            )
        out = env.step(action)
        trace.steps.append(StepRecord(t, obs, action, out.reward, env.infected_count()))
        obs, last = out.observation, action
    trace.truth_reads = env.truth_reads
    return trace
