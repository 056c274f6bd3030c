"""Two-level deep Q-learning for budgeted node screening.

A *primary* Q-function scores whole screening sets for a round; a chain of
*secondary* Q-functions fills the budget one node at a time. Each secondary
pick is rewarded with the primary's marginal value gain, and a curriculum
coefficient ``tau`` blends ground truth into states and rewards early in
training.
"""
from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probability, make_rng
from .baselines import ScreeningMixin
from .belief import BeliefFilter, curriculum_belief
from .epidemic import (
    EpidemicParams,
    RoundInfo,
    SISEnvironment,
    episode_seeds,
    run_episode,
)
from .graph import ContactNetwork
from .neural import (
    DEFAULT_LAYER_SIZES,
    NORM_MODES,
    Adam,
    GcnParams,
    NormalizedAdjacency,
    backward,
    forward,
    init_params,
    load_params,
    normalize_adjacency,
    save_params,
    sgd_step,
)

log = logging.getLogger(__name__)

ABLATIONS = ("full", "two_level_no_cl", "single_agent_cl", "single_agent_no_cl")
FIT_SCHEDULES = ("iteration", "end")
OPTIMIZERS = ("adam", "sgd")
PRIMARY = -1
PRIMARY_FEATURES = 2


class BudgetError(RuntimeError):
    """Fewer feasible nodes than the screening budget."""


@dataclass
class TrainConfig:
    alpha: float = 0.98
    epsilon: float = 0.1
    lr: float = 0.005
    episodes_per_iteration: int = 100
    iterations: int = 100
    batch_size: int = 32
    k: int | None = None
    num_secondary_agents: int | None = None
    curriculum_warmup_episodes: int | None = None
    ablation: str = "full"
    buffer_capacity: int = 5000
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    norm_mode: str = "symmetric_selfloops"
    fit_schedule: str = "iteration"
    reward_scale: float | None = None
    horizon: int | None = None
    optimizer: str = "adam"
    readout: bool = True
    skip: bool = True
    fit_epochs: int = 3

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        check_probability(self.epsilon, "epsilon")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        for name in ("episodes_per_iteration", "batch_size", "buffer_capacity", "fit_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"norm_mode must be one of {NORM_MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.fit_schedule not in FIT_SCHEDULES:
            raise ValueError(f"fit_schedule must be one of {FIT_SCHEDULES}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        m = self.num_secondary_agents
        if m is not None and (m < 1 or (self.k is not None and m > self.k)):
            raise ValueError("num_secondary_agents must lie in [1, k]")
        if self.curriculum_warmup_episodes is not None and self.curriculum_warmup_episodes < 1:
            raise ValueError("curriculum_warmup_episodes must be >= 1")

    @property
    def uses_curriculum(self) -> bool:
        return self.ablation in ("full", "single_agent_cl")

    @property
    def single_agent(self) -> bool:
        return self.ablation.startswith("single_agent")

    def total_episodes(self) -> int:
        return self.iterations * self.episodes_per_iteration

    def warmup(self) -> int:
        if self.curriculum_warmup_episodes is not None:
            return self.curriculum_warmup_episodes
        return max(1, round(0.2 * self.total_episodes()))


# small configuration used by the acceptance tests and CI
DESK_PRESET = dict(iterations=10, episodes_per_iteration=20, curriculum_warmup_episodes=40)


# ---------------------------------------------------------------------------
# replay memory
# ---------------------------------------------------------------------------

@dataclass
class Transition:
    """One stored decision.

    ``state`` is an ``(n, f)`` feature matrix for secondary tuples and an
    ``(n,)`` belief for primary tuples. ``next_agent`` names the Q-function
    used to bootstrap (``-1`` is the primary); ``next_action`` is the action
    actually taken there.
    """

    state: np.ndarray
    action: int | tuple[int, ...]
    reward: float
    next_state: np.ndarray | None
    next_action: int | tuple[int, ...] | None
    agent_index: int
    next_agent: int | None = None
    terminal: bool = False


class ReplayBuffer:
    def __init__(self, capacity: int = 5000):
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i) -> Transition:
        return self._items[i]

    def add(self, tr: Transition) -> None:
        self._items.append(tr)

    def minibatches(self, batch_size: int, rng: np.random.Generator):
        """One shuffled pass over the buffer."""
        order = rng.permutation(len(self._items))
        items = list(self._items)
        for start in range(0, order.size, batch_size):
            yield [items[i] for i in order[start:start + batch_size]]


# ---------------------------------------------------------------------------
# schedules and reward shaping
# ---------------------------------------------------------------------------

def tau_schedule(episode: int, warmup: int) -> float:
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    return max(0.0, 1.0 - episode / warmup)


def curriculum_reward(tau: float, reward: float, warmup_reward: float) -> float:
    """``tau * warmup_reward + (1 - tau) * reward``; the warmup reward counts
    infected nodes caught by the screening."""
    check_probability(tau, "tau")
    return tau * warmup_reward + (1.0 - tau) * reward


def quota_owners(k: int, m: int) -> list[int]:
    """Secondary agent responsible for each budget slot.

    Agents take ``ceil(k / m)`` consecutive slots; the last agent absorbs
    whatever remains, so some agents may own no slot when ``m`` does not
    divide ``k`` evenly.
    """
    q = math.ceil(k / m)
    return [min(i // q, m - 1) for i in range(k)]


# ---------------------------------------------------------------------------
# Q-functions
# ---------------------------------------------------------------------------

def encode_action(states: np.ndarray, actions) -> np.ndarray:
    """Zero the belief of screened nodes. ``states`` is ``(n,)`` or ``(B, n)``."""
    out = np.array(states, dtype=np.float64, copy=True)
    if out.ndim == 1:
        out[list(actions)] = 0.0
        return out
    for row, act in zip(out, actions):
        row[list(act)] = 0.0
    return out


def primary_features(states: np.ndarray, actions) -> np.ndarray:
    """Stack the belief and its action-encoded copy as two input channels.

    The encoded channel alone erases the belief at screened nodes, so the
    primary could not tell how much infection an action removes.
    """
    states = np.asarray(states, dtype=np.float64)
    return _center(np.stack([states, encode_action(states, actions)], axis=-1))


def _center(x: np.ndarray) -> np.ndarray:
    # probabilities in [0, 1] -> [-1, 1]; bias-free sigmoid layers train far
    # faster on zero-centred inputs
    return 2.0 * x - 1.0


@dataclass
class QFunctions:
    """Parameter storage for one primary and the secondary Q-functions."""

    adj: NormalizedAdjacency
    primary: GcnParams
    secondaries: list[GcnParams]
    budget_channel: bool = False

    @property
    def n(self) -> int:
        return self.adj.n

    def primary_value(self, states: np.ndarray, actions) -> np.ndarray | float:
        """Q^I(s, a): mean-pooled GCN output on (belief, action-encoded belief)."""
        _, pooled, _ = forward(self.primary, self.adj, primary_features(states, actions))
        return pooled / self.n

    def secondary_values(self, j: int, features: np.ndarray) -> np.ndarray:
        per_node, _, _ = forward(self.secondaries[j], self.adj, features)
        return per_node


def secondary_features(belief: np.ndarray, remaining: int | None = None, k: int = 1) -> np.ndarray:
    """Feature matrix for a secondary agent: the belief column, plus a
    constant remaining-budget column for single-agent variants."""
    if remaining is None:
        return _center(belief[:, None])
    return _center(np.column_stack([belief, np.full(belief.size, remaining / k)]))


def secondary_select(q_params: GcnParams, adj: NormalizedAdjacency, features: np.ndarray,
                     feasible, epsilon: float, rng: np.random.Generator) -> int:
    """epsilon-greedy node choice; ties go to the lowest node id."""
    pool = np.fromiter(sorted(int(v) for v in feasible), dtype=np.int64)
    if pool.size == 0:
        raise BudgetError("no feasible node to select")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(pool[rng.integers(pool.size)])
    per_node, _, _ = forward(q_params, adj, features)
    return int(pool[np.argmax(per_node[pool])])


@dataclass
class BudgetStep:
    agent: int
    features: np.ndarray
    node: int
    reward: float


def run_budget_sequence(q: QFunctions, belief: np.ndarray, observed: Iterable[int], k: int,
                        owners: Sequence[int], epsilon: float, rng: np.random.Generator,
                        with_rewards: bool = True):
    """Fill the budget one node at a time.

    Returns the ordered picks and, per pick, the acting agent, the features
    it saw and its marginal reward ``Q^I(s, a_<=i) - Q^I(s, a_<i)``.
    """
    feasible = set(range(belief.size)) - set(int(v) for v in observed)
    if len(feasible) < k:
        raise BudgetError(f"budget {k} exceeds {len(feasible)} feasible nodes")
    picks: list[int] = []
    steps: list[BudgetStep] = []
    encoded = np.array(belief, dtype=np.float64, copy=True)
    q_prev = q.primary_value(belief, ()) if with_rewards else 0.0
    for i in range(k):
        j = owners[i]
        feats = secondary_features(encoded, k - i if q.budget_channel else None, k)
        node = secondary_select(q.secondaries[j], q.adj, feats, feasible, epsilon, rng)
        picks.append(node)
        feasible.discard(node)
        encoded[node] = 0.0
        reward = 0.0
        if with_rewards:
            q_new = q.primary_value(belief, picks)
            reward = float(q_new - q_prev)
            q_prev = q_new
        steps.append(BudgetStep(j, feats, node, reward))
    return picks, steps


# ---------------------------------------------------------------------------
# targets and fitting
# ---------------------------------------------------------------------------

def compute_targets(batch: Sequence[Transition], q: QFunctions, alpha: float) -> np.ndarray:
    """On-trajectory TD targets ``r + alpha * Q_next(s', a')``; ``r`` alone at the horizon."""
    y = np.array([tr.reward for tr in batch], dtype=np.float64)
    groups: dict[int, list[int]] = {}
    for idx, tr in enumerate(batch):
        if tr.terminal:
            continue
        if tr.next_action is None or tr.next_state is None or tr.next_agent is None:
            raise ValueError(f"non-terminal transition {idx} lacks next state/action")
        groups.setdefault(tr.next_agent, []).append(idx)
    for agent, idxs in groups.items():
        if agent == PRIMARY:
            states = np.stack([batch[i].next_state for i in idxs])
            values = q.primary_value(states, [batch[i].next_action for i in idxs])
        else:
            feats = np.stack([batch[i].next_state for i in idxs])
            per_node = q.secondary_values(agent, feats)
            acts = np.array([batch[i].next_action for i in idxs])
            values = per_node[np.arange(len(idxs)), acts]
        y[idxs] += alpha * np.asarray(values)
    return y


def _update(params: GcnParams, grads, cfg: TrainConfig, opt: Adam | None) -> GcnParams:
    if opt is None:
        return sgd_step(params, grads, cfg.lr)
    return opt.step(params, grads, cfg.lr)


def _fit_primary(q: QFunctions, buffer: ReplayBuffer, cfg: TrainConfig, rng,
                 opt: Adam | None = None) -> float:
    losses = []
    for batch in buffer.minibatches(cfg.batch_size, rng):
        y = compute_targets(batch, q, cfg.alpha)
        x = primary_features(np.stack([tr.state for tr in batch]), [tr.action for tr in batch])
        _, pooled, cache = forward(q.primary, q.adj, x)
        err = pooled / q.n - y
        losses.append(float(np.mean(err ** 2)))
        grads = backward(q.primary, cache, grad_pooled=2.0 * err / (len(batch) * q.n))
        q.primary = _update(q.primary, grads, cfg, opt)
    return float(np.mean(losses)) if losses else float("nan")


def _fit_secondary(q: QFunctions, j: int, buffer: ReplayBuffer, cfg: TrainConfig, rng,
                   opt: Adam | None = None) -> float:
    losses = []
    for batch in buffer.minibatches(cfg.batch_size, rng):
        y = compute_targets(batch, q, cfg.alpha)
        feats = np.stack([tr.state for tr in batch])
        acts = np.array([tr.action for tr in batch])
        rows = np.arange(len(batch))
        per_node, _, cache = forward(q.secondaries[j], q.adj, feats)
        err = per_node[rows, acts] - y
        losses.append(float(np.mean(err ** 2)))
        g = np.zeros_like(per_node)
        g[rows, acts] = 2.0 * err / len(batch)
        grads = backward(q.secondaries[j], cache, g)
        q.secondaries[j] = _update(q.secondaries[j], grads, cfg, opt)
    return float(np.mean(losses)) if losses else float("nan")


# ---------------------------------------------------------------------------
# the estimator
# ---------------------------------------------------------------------------

LOG_COLUMNS = ("iteration", "episode", "tau", "epsilon", "mean_episode_reward",
               "loss_primary", "loss_secondary_mean")


class SOSAgent(ScreeningMixin, BaseEstimator):
    """Primary/secondary GCN Q-learner for selecting ``k`` nodes per round.

    Parameters mirror :class:`TrainConfig`. ``fit`` trains on a contact
    network; afterwards the agent is a screening policy (``reset``/``act``)
    that keeps its own belief filter and never sees the true state.
    """

    def __init__(self, alpha=0.98, epsilon=0.1, lr=0.005, episodes_per_iteration=100,
                 iterations=100, batch_size=32, k=None, num_secondary_agents=None,
                 curriculum_warmup_episodes=None, ablation="full", buffer_capacity=5000,
                 layer_sizes=DEFAULT_LAYER_SIZES, norm_mode="symmetric_selfloops",
                 fit_schedule="iteration", reward_scale=None, horizon=None,
                 optimizer="adam", readout=True, skip=True,
                 fit_epochs=3, random_state=None):
        self.alpha = alpha
        self.epsilon = epsilon
        self.lr = lr
        self.episodes_per_iteration = episodes_per_iteration
        self.iterations = iterations
        self.batch_size = batch_size
        self.k = k
        self.num_secondary_agents = num_secondary_agents
        self.curriculum_warmup_episodes = curriculum_warmup_episodes
        self.ablation = ablation
        self.buffer_capacity = buffer_capacity
        self.layer_sizes = layer_sizes
        self.norm_mode = norm_mode
        self.fit_schedule = fit_schedule
        self.reward_scale = reward_scale
        self.horizon = horizon
        self.optimizer = optimizer
        self.readout = readout
        self.skip = skip
        self.fit_epochs = fit_epochs
        self.random_state = random_state

    @classmethod
    def from_config(cls, config: TrainConfig, random_state=None) -> "SOSAgent":
        return cls(**asdict(config), random_state=random_state)

    def config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in self.get_params().items() if k in names})

    # -- setup --------------------------------------------------------------

    def _setup(self, net: ContactNetwork, epidemic: EpidemicParams, k: int):
        cfg = self.config()
        if cfg.k is not None and cfg.k != k:
            raise ValueError(f"config budget k={cfg.k} conflicts with requested k={k}")
        m = 1 if cfg.single_agent else (cfg.num_secondary_agents or k)
        if m > k:
            raise ValueError(f"num_secondary_agents={m} exceeds budget {k}")
        ss = np.random.SeedSequence(self.random_state)
        init_ss, self._train_ss = ss.spawn(2)
        seeds = init_ss.generate_state(m + 1)
        in_sec = 2 if cfg.single_agent else 1
        adj = normalize_adjacency(net, cfg.norm_mode)
        self.q_ = QFunctions(
            adj,
            init_params(cfg.layer_sizes, PRIMARY_FEATURES, int(seeds[0]),
                        readout=cfg.readout, skip=cfg.skip),
            [init_params(cfg.layer_sizes, in_sec, int(s), readout=cfg.readout, skip=cfg.skip)
             for s in seeds[1:]],
            budget_channel=cfg.single_agent,
        )
        self.network_ = net
        self.epidemic_ = epidemic
        self.k_ = k
        self.owners_ = [0] * k if cfg.single_agent else quota_owners(k, m)
        self.reward_scale_ = cfg.reward_scale if cfg.reward_scale is not None else 1.0 / net.n
        self.log_: list[dict] = []
        return cfg

    def fit(self, net: ContactNetwork, epidemic: EpidemicParams, k: int | None = None,
            horizon: int | None = None, env_network: ContactNetwork | None = None):
        """Train on ``net``. Dynamics run on ``env_network`` when given (the
        agent still only sees ``net``)."""
        k = k if k is not None else self.k
        horizon = horizon if horizon is not None else self.horizon
        if k is None or horizon is None:
            raise ValueError("fit needs a budget k and a horizon")
        cfg = self._setup(net, epidemic, k)
        self.horizon_ = horizon
        primary_buf = ReplayBuffer(cfg.buffer_capacity)
        sec_bufs = [ReplayBuffer(cfg.buffer_capacity) for _ in self.q_.secondaries]
        self.buffers_ = (primary_buf, sec_bufs)
        if cfg.optimizer == "adam":
            self._opts = (Adam(self.q_.primary), [Adam(p) for p in self.q_.secondaries])
        else:
            self._opts = (None, [None] * len(self.q_.secondaries))
        self.truth_reads_ = 0
        env_net = env_network if env_network is not None else net
        rng = make_rng(self._train_ss.spawn(1)[0])
        warmup = cfg.warmup()
        episode = 0
        for it in range(cfg.iterations):
            totals = []
            tau = 0.0
            for _ in range(cfg.episodes_per_iteration):
                tau = tau_schedule(episode, warmup) if cfg.uses_curriculum else 0.0
                totals.append(self._collect_episode(env_net, cfg, tau, rng))
                episode += 1
            losses = (float("nan"), float("nan"))
            if cfg.fit_schedule == "iteration" or it == cfg.iterations - 1:
                losses = self._fit_all(cfg, rng)
            row = dict(iteration=it, episode=episode - 1, tau=tau, epsilon=cfg.epsilon,
                       mean_episode_reward=float(np.mean(totals)),
                       loss_primary=losses[0], loss_secondary_mean=losses[1])
            self.log_.append(row)
            log.info("iteration %d: mean reward %.2f, loss %.4g / %.4g",
                     it, row["mean_episode_reward"], *losses)
        return self

    def _fit_all(self, cfg: TrainConfig, rng) -> tuple[float, float]:
        primary_buf, sec_bufs = self.buffers_
        opt_primary, opt_sec = self._opts
        for _ in range(cfg.fit_epochs):
            lp = _fit_primary(self.q_, primary_buf, cfg, rng, opt_primary)
            ls = [_fit_secondary(self.q_, j, buf, cfg, rng, opt_sec[j])
                  for j, buf in enumerate(sec_bufs) if len(buf)]
        return lp, float(np.mean(ls)) if ls else float("nan")

    def _collect_episode(self, env_net: ContactNetwork, cfg: TrainConfig, tau: float,
                         rng: np.random.Generator) -> int:
        primary_buf, sec_bufs = self.buffers_
        q = self.q_
        init_ss, dyn_ss, _ = episode_seeds(np.random.SeedSequence(int(rng.integers(2**63))))
        env = SISEnvironment(env_net, self.epidemic_)
        obs = env.reset(init_ss, dyn_ss)
        filt = BeliefFilter(self.network_, self.epidemic_.beta, self.epidemic_.gamma)
        pending_primary = None
        pending_last = None
        total = 0
        T = self.horizon_
        for t in range(T + 1):
            belief = filt.start_round(obs).probs
            truth = None
            if tau > 0.0:
                truth = env.true_labels()
                state = curriculum_belief(tau, truth, filt.belief).probs
            else:
                state = belief.copy()
            picks, steps = run_budget_sequence(q, state, obs, self.k_, self.owners_,
                                               cfg.epsilon, rng)
            action = tuple(picks)
            if pending_primary is not None:
                s, a, r = pending_primary
                primary_buf.add(Transition(s, a, r, state, action, PRIMARY, PRIMARY))
            if pending_last is not None:
                st = pending_last
                sec_bufs[st.agent].add(Transition(st.features, st.node, st.reward, state,
                                                  action, st.agent, PRIMARY))
            for cur, nxt in zip(steps, steps[1:]):
                sec_bufs[cur.agent].add(Transition(cur.features, cur.node, cur.reward,
                                                   nxt.features, nxt.node, cur.agent, nxt.agent))
            warm = float(truth[list(picks)].sum()) if truth is not None else 0.0
            out = env.step(picks)
            total += out.reward
            shaped = curriculum_reward(tau, out.reward, warm) * self.reward_scale_
            filt.commit_action(picks)
            pending_primary = (state, action, shaped)
            pending_last = steps[-1]
            obs = out.observation
        s, a, r = pending_primary
        primary_buf.add(Transition(s, a, r, None, None, PRIMARY, None, terminal=True))
        st = pending_last
        sec_bufs[st.agent].add(Transition(st.features, st.node, st.reward, None, None,
                                          st.agent, None, terminal=True))
        self.truth_reads_ += env.truth_reads
        return total

    # -- policy interface ---------------------------------------------------

    def reset(self, k: int, rng) -> None:
        check_is_fitted(self, "q_")
        if k != self.k_:
            raise ValueError(f"agent was trained for budget {self.k_}, asked for {k}")
        self._filter = BeliefFilter(self.network_, self.epidemic_.beta, self.epidemic_.gamma)
        self._rng = make_rng(rng)

    def act(self, info: RoundInfo) -> frozenset[int]:
        belief = self._filter.start_round(info.observation).probs
        try:
            picks, _ = run_budget_sequence(self.q_, belief, info.observation, self.k_,
                                           self.owners_, 0.0, self._rng, with_rewards=False)
        except BudgetError as exc:
            raise BudgetError(f"round {info.t}: {exc}") from exc
        self._filter.commit_action(picks)
        return frozenset(picks)

    def _begin(self, k: int) -> None:
        check_is_fitted(self, "q_")
        if k != self.k_:
            raise ValueError(f"agent was trained for budget {self.k_}, asked for {k}")

    def _pick(self, belief, observed, k) -> frozenset[int]:
        return frozenset(self.select(belief, observed))

    def select(self, belief: np.ndarray, observed: Iterable[int] = ()) -> list[int]:
        """Greedy ordered picks for a given belief vector."""
        check_is_fitted(self, "q_")
        picks, _ = run_budget_sequence(self.q_, np.asarray(belief, dtype=np.float64), observed,
                                       self.k_, self.owners_, 0.0, make_rng(0), with_rewards=False)
        return picks

    # -- persistence --------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        check_is_fitted(self, "q_")
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        cfg = self.config()
        save_params(self.q_.primary, d / "primary.json", cfg.norm_mode)
        files = []
        for j, p in enumerate(self.q_.secondaries):
            name = f"secondary_{j}.json"
            save_params(p, d / name, cfg.norm_mode)
            files.append(name)
        manifest = {
            "k": self.k_,
            "m": len(self.q_.secondaries),
            "ablation": cfg.ablation,
            "owners": list(self.owners_),
            "n": self.network_.n,
            "beta": self.epidemic_.beta,
            "gamma": self.epidemic_.gamma,
            "init_infect_prob": self.epidemic_.init_infect_prob,
            "primary": "primary.json",
            "secondaries": files,
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(cfg).items()},
            "random_state": self.random_state,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path, net: ContactNetwork) -> "SOSAgent":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        if manifest["n"] != net.n:
            raise ValueError(f"checkpoint is for n={manifest['n']}, graph has n={net.n}")
        cfg = TrainConfig(**manifest["config"])
        agent = cls.from_config(cfg, manifest.get("random_state"))
        primary, mode = load_params(d / manifest["primary"])
        secondaries = [load_params(d / f)[0] for f in manifest["secondaries"]]
        agent.q_ = QFunctions(normalize_adjacency(net, mode), primary, secondaries,
                              budget_channel=cfg.single_agent)
        agent.network_ = net
        agent.epidemic_ = EpidemicParams(manifest["beta"], manifest["gamma"],
                                         manifest["init_infect_prob"])
        agent.k_ = manifest["k"]
        agent.owners_ = list(manifest["owners"])
        agent.reward_scale_ = cfg.reward_scale if cfg.reward_scale is not None else 1.0 / net.n
        agent.log_ = []
        return agent


# ---------------------------------------------------------------------------
# functional entry points
# ---------------------------------------------------------------------------

def train(net: ContactNetwork, params: EpidemicParams, config: TrainConfig, seed,
          k: int | None = None, horizon: int | None = None,
          env_network: ContactNetwork | None = None) -> SOSAgent:
    agent = SOSAgent.from_config(config, random_state=seed)
    return agent.fit(net, params, k if k is not None else config.k,
                     horizon if horizon is not None else config.horizon,
                     env_network=env_network)


@dataclass
class EvaluationResult:
    totals: list[int]
    pick_counts: np.ndarray
    traces: list = field(default_factory=list)

    @property
    def mean_total(self) -> float:
        return float(np.mean(self.totals))


def evaluate(policy, net: ContactNetwork, params: EpidemicParams, T: int, trials: int,
             seed, k: int) -> EvaluationResult:
    """Greedy rollouts of a fitted policy on ``net``; trial ``i`` uses the
    episode seed ``(seed, i)`` so different policies see matched streams."""
    totals, traces = [], []
    counts = np.zeros(net.n, dtype=np.int64)
    for i in range(trials):
        trace = run_episode(net, params, policy, T, np.random.SeedSequence([seed, i]), k)
        totals.append(trace.total_reward)
        counts += trace.pick_counts(net.n)
        traces.append(trace)
    return EvaluationResult(totals, counts, traces)
