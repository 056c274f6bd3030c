"""Structure-only screening policies used as comparison points."""
from __future__ import annotations

from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._validation import make_rng
from .epidemic import RoundInfo
from .graph import ContactNetwork, spectral_radius

# eigenvalues closer than this count as tied (power-iteration noise)
TIE_TOL = 1e-7


def _check_budget(feasible, k: int) -> list[int]:
    pool = sorted(int(v) for v in feasible)
    if k < 0:
        raise ValueError(f"budget must be >= 0, got {k}")
    if len(pool) < k:
        raise ValueError(f"only {len(pool)} feasible nodes for budget {k}")
    return pool


def random_policy(feasible: Iterable[int], k: int, rng) -> frozenset[int]:
    pool = _check_budget(feasible, k)
    if k == 0:
        return frozenset()
    picks = make_rng(rng).choice(len(pool), size=k, replace=False)
    return frozenset(pool[i] for i in picks)


def max_degree_policy(net: ContactNetwork, feasible: Iterable[int], k: int) -> frozenset[int]:
    pool = _check_budget(feasible, k)
    deg = net.degrees
    # stable sort on -degree keeps the lowest id first among ties
    ranked = sorted(pool, key=lambda v: -deg[v])
    return frozenset(ranked[:k])


def eigen_drop_policy(net: ContactNetwork, feasible: Iterable[int], k: int,
                      tol: float = 1e-10) -> frozenset[int]:
    """Greedily remove the feasible node whose removal most lowers the
    residual spectral radius, ``k`` times."""
    pool = _check_budget(feasible, k)
    removed: list[int] = []
    residual = net
    for _ in range(k):
        best, best_val = None, np.inf
        for v in pool:
            if v in removed:
                continue
            val = spectral_radius(residual.without_nodes([v]), tol=tol)
            if val < best_val - TIE_TOL:
                best, best_val = v, val
        removed.append(best)
        residual = residual.without_nodes([best])
    return frozenset(removed)


def none_policy(*_args, **_kwargs) -> frozenset[int]:
    return frozenset()


def _feasible_budget(info: RoundInfo) -> tuple[list[int], int]:
    pool = sorted(info.feasible)
    return pool, min(info.k, len(pool))


class ScreeningMixin:
    """Batch interface for fitted screening policies.

    Each row of ``X`` is a belief vector over the fitted network's nodes.
    ``observed`` optionally gives, per row, the passively observed nodes
    that may not be screened. The belief only matters to policies that use
    it; the graph heuristics look at ``observed`` alone.
    """

    def _check_X(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        X = np.atleast_2d(X)
        n = self.network_.n
        if X.shape[1] != n:
            raise ValueError(f"X has {X.shape[1]} columns but the network has {n} nodes")
        if X.min(initial=0.0) < 0.0 or X.max(initial=0.0) > 1.0:
            raise ValueError("beliefs must lie in [0, 1]")
        return X

    def _budget(self, k):
        k = getattr(self, "k_", None) if k is None else k
        if k is None:
            raise ValueError("pass the screening budget k")
        return int(k)

    def _begin(self, k: int) -> None:
        # one reset per batch, so a seeded Random policy varies across rows
        self.reset(k, getattr(self, "random_state", None))

    def _pick(self, belief, observed, k) -> frozenset[int]:
        return frozenset(self.act(RoundInfo(0, observed, frozenset(), k, self.network_)))

    def predict(self, X, k: int | None = None, observed=None) -> list[frozenset[int]]:
        """Action set for each row of ``X``."""
        check_is_fitted(self, "network_")
        X = self._check_X(X)
        k = self._budget(k)
        observed = [()] * len(X) if observed is None else list(observed)
        if len(observed) != len(X):
            raise ValueError(f"observed has {len(observed)} entries for {len(X)} rows")
        self._begin(k)
        return [self._pick(row, frozenset(int(v) for v in obs), k)
                for row, obs in zip(X, observed)]

    def transform(self, X, k: int | None = None, observed=None) -> np.ndarray:
        """0/1 matrix marking the nodes each row would screen."""
        actions = self.predict(X, k, observed)
        out = np.zeros((len(actions), self.network_.n))
        for i, act in enumerate(actions):
            out[i, sorted(act)] = 1.0
        return out


class RandomPolicy(ScreeningMixin, BaseEstimator):
    """Uniform sample of ``k`` feasible nodes each round."""

    name = "random"

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, net: ContactNetwork, y=None):
        self.network_ = net
        self._rng = make_rng(self.random_state)
        return self

    def reset(self, k, rng):
        self._rng = make_rng(rng)

    def act(self, info: RoundInfo) -> frozenset[int]:
        pool, k = _feasible_budget(info)
        return random_policy(pool, k, self._rng)


class MaxDegreePolicy(ScreeningMixin, BaseEstimator):
    name = "maxdegree"

    def fit(self, net: ContactNetwork, y=None):
        self.network_ = net
        return self

    def reset(self, k, rng):
        pass

    def act(self, info: RoundInfo) -> frozenset[int]:
        check_is_fitted(self, "network_")
        pool, k = _feasible_budget(info)
        return max_degree_policy(self.network_, pool, k)


class EigenvaluePolicy(ScreeningMixin, BaseEstimator):
    """Greedy spectral-radius reduction on the fitted graph.

    Picks are cached per feasible set; the graph is static, so repeated
    rounds with the same observation reuse the greedy result.
    """

    name = "eigenvalue"

    def __init__(self, tol: float = 1e-10):
        self.tol = tol

    def fit(self, net: ContactNetwork, y=None):
        self.network_ = net
        self._cache: dict = {}
        return self

    def reset(self, k, rng):
        pass

    def act(self, info: RoundInfo) -> frozenset[int]:
        check_is_fitted(self, "network_")
        pool, k = _feasible_budget(info)
        key = (frozenset(pool), k)
        if key not in self._cache:
            self._cache[key] = eigen_drop_policy(self.network_, pool, k, tol=self.tol)
        return self._cache[key]


class NoIntervention(ScreeningMixin, BaseEstimator):
    name = "none"

    def fit(self, net: ContactNetwork = None, y=None):
        self.network_ = net
        return self

    def reset(self, k, rng):
        pass

    def act(self, info: RoundInfo) -> frozenset[int]:
        return frozenset()


BASELINES = {
    "random": RandomPolicy,
    "maxdegree": MaxDegreePolicy,
    "eigenvalue": EigenvaluePolicy,
    "none": NoIntervention,
}


def make_baseline(name: str, net: ContactNetwork):
    try:
        cls = BASELINES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(BASELINES)}") from None
    return cls().fit(net)
