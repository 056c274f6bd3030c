"""Mean-field belief filter over per-node infection probabilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._validation import check_probability
from .graph import ContactNetwork


@dataclass(frozen=True)
class BeliefState:
    probs: np.ndarray
    t: int = 0

    @property
    def n(self) -> int:
        return self.probs.size

    def to_csv_row(self) -> str:
        return ",".join(repr(float(p)) for p in self.probs) + "\n"


def _index(nodes: Iterable[int]) -> np.ndarray:
    return np.fromiter((int(v) for v in nodes), dtype=np.int64)


def init_belief(n: int) -> BeliefState:
    if n < 1:
        raise ValueError(f"belief needs n >= 1, got {n}")
    return BeliefState(np.full(n, 0.5), t=0)


def observe_update(b: BeliefState, observed: Iterable[int], gamma: float) -> BeliefState:
    """Condition on which nodes were (and were not) passively cured.

    Unobserved nodes shrink towards susceptible: an infected node would have
    been seen with probability ``gamma``.
    """
    check_probability(gamma, "gamma")
    if gamma >= 1.0:
        raise ValueError("observe_update needs gamma < 1")
    p = b.probs
    kept = (1.0 - gamma) * p
    out = kept / ((1.0 - p) + kept)
    out[_index(observed)] = 1.0
    return BeliefState(out, b.t)


def propagate(
    b_hat: BeliefState, net: ContactNetwork, beta: float, observed: Iterable[int] = ()
) -> BeliefState:
    """One step of independent-neighbour transmission; observed nodes are known S."""
    check_probability(beta, "beta")
    p = b_hat.probs
    src, dst = net.arcs
    escape = np.ones(net.n)
    if src.size:
        np.multiply.at(escape, dst, 1.0 - beta * p[src])
    out = (1.0 - escape) * (1.0 - p) + p
    out[_index(observed)] = 0.0
    np.clip(out, 0.0, 1.0, out=out)
    return BeliefState(out, b_hat.t + 1)


def apply_action(b: BeliefState, action: Iterable[int]) -> BeliefState:
    out = b.probs.copy()
    out[_index(action)] = 0.0
    return BeliefState(out, b.t)


def curriculum_belief(tau: float, x, b: BeliefState) -> BeliefState:
    """Blend the true 0/1 state into the belief: ``tau * x + (1 - tau) * b``."""
    check_probability(tau, "tau")
    x = np.asarray(x, dtype=np.float64)
    if tau == 1.0:
        return BeliefState(x.copy(), b.t)
    if tau == 0.0:
        return BeliefState(b.probs.copy(), b.t)
    return BeliefState(tau * x + (1.0 - tau) * b.probs, b.t)


class BeliefFilter:
    """Per-episode filter state held by a screening agent.

    ``start_round`` folds in the new observation and the previous round's
    action, returning the belief the agent acts on.
    """

    def __init__(self, net: ContactNetwork, beta: float, gamma: float):
        self.net = net
        self.beta = beta
        self.gamma = gamma
        self.belief = init_belief(net.n)
        self._started = False

    def reset(self) -> None:
        self.belief = init_belief(self.net.n)
        self._started = False

    def start_round(self, observation: Iterable[int]) -> BeliefState:
        observation = tuple(observation)
        if self._started:
            b_hat = observe_update(self.belief, observation, self.gamma)
            self.belief = propagate(b_hat, self.net, self.beta, observation)
        self._started = True
        return self.belief

    def commit_action(self, action: Iterable[int]) -> None:
        self.belief = apply_action(self.belief, action)
