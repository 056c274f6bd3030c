"""Sigmoid GCN with a linear per-node head, written directly in numpy.

Layer ``l`` computes ``z_{l+1} = sigmoid(A_hat @ z_l @ W_l)``; the head maps
the last embedding to one scalar per node. Inputs may be a single graph
signal ``(n, f)`` or a batch ``(B, n, f)`` over the same graph.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import ContactNetwork

DEFAULT_LAYER_SIZES = (8, 16, 8, 32)
NORM_MODES = ("symmetric_selfloops", "literal")


class StaleCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class NormalizedAdjacency:
    matrix: np.ndarray | sp.csr_matrix
    mode: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def matmul(self, z: np.ndarray) -> np.ndarray:
        """``A_hat @ z`` for ``z`` of shape ``(n, f)`` or ``(B, n, f)``."""
        m = self.matrix
        if not sp.issparse(m) or z.ndim == 2:
            return m @ z
        b, n, f = z.shape
        flat = np.ascontiguousarray(z.transpose(1, 0, 2)).reshape(n, b * f)
        return np.asarray(m @ flat).reshape(n, b, f).transpose(1, 0, 2)

    def rmatmul(self, g: np.ndarray) -> np.ndarray:
        """``A_hat.T @ g`` with the same batching rules."""
        mt = self.matrix.T
        if not sp.issparse(mt) or g.ndim == 2:
            return mt @ g
        b, n, f = g.shape
        flat = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(n, b * f)
        return np.asarray(mt @ flat).reshape(n, b, f).transpose(1, 0, 2)


def normalize_adjacency(
    net: ContactNetwork, mode: str = "symmetric_selfloops", dense_limit: int = 1024
) -> NormalizedAdjacency:
    """``symmetric_selfloops``: D~^-1/2 (A + I) D~^-1/2.
    ``literal``: D^-1/2 A D^1/2, with isolated nodes given degree 1."""
    if mode not in NORM_MODES:
        raise ValueError(f"unknown normalization mode {mode!r}; choose from {NORM_MODES}")
    a = net.adjacency
    if mode == "symmetric_selfloops":
        a = a + sp.identity(net.n, format="csr")
        d = np.asarray(a.sum(axis=1)).ravel()
        left = right = 1.0 / np.sqrt(d)
    else:
        d = np.maximum(np.asarray(a.sum(axis=1)).ravel(), 1.0)
        left, right = 1.0 / np.sqrt(d), np.sqrt(d)
    m = sp.diags(left) @ a @ sp.diags(right)
    m = m.toarray() if net.n <= dense_limit else sp.csr_matrix(m)
    return NormalizedAdjacency(m, mode)


@dataclass
class GcnParams:
    """Layer weights, the per-node head and two optional extra terms.

    With a readout vector ``r`` and a skip vector ``s = (s1, s2)`` the output
    for node ``v`` is ``z_L[v] @ head + mean_u(z_L[u]) @ r + x[v] @ s1 +
    mean_u(x[u]) @ s2`` where ``x`` is the raw input signal.
    """

    layers: list[np.ndarray]
    head: np.ndarray
    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    in_features: int = 1
    seed: int | None = None
    readout: np.ndarray | None = None
    skip: np.ndarray | None = None

    def copy(self) -> "GcnParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def arrays(self) -> list[np.ndarray]:
        return [*self.layers, self.head,
                *(a for a in (self.readout, self.skip) if a is not None)]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "GcnParams":
        nl = len(self.layers)
        rest = iter(arrays[nl + 1:])
        readout = next(rest) if self.readout is not None else None
        skip = next(rest) if self.skip is not None else None
        return GcnParams(list(arrays[:nl]), arrays[nl], tuple(self.layer_sizes),
                         self.in_features, self.seed, readout, skip)

    def validate(self) -> None:
        width = self.in_features
        for i, w in enumerate(self.layers):
            if w.shape[0] != width:
                raise ValueError(f"layer {i}: expected {width} input rows, got {w.shape}")
            width = w.shape[1]
        if self.head.shape != (width,):
            raise ValueError(f"head: expected shape ({width},), got {self.head.shape}")
        if self.readout is not None and self.readout.shape != (width,):
            raise ValueError(f"readout: expected shape ({width},), got {self.readout.shape}")
        if self.skip is not None and self.skip.shape != (2 * self.in_features,):
            raise ValueError(
                f"skip: expected shape ({2 * self.in_features},), got {self.skip.shape}")


@dataclass
class Gradients:
    layers: list[np.ndarray]
    head: np.ndarray
    readout: np.ndarray | None = None
    skip: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [*self.layers, self.head,
                *(a for a in (self.readout, self.skip) if a is not None)]


@dataclass
class ForwardCache:
    params: GcnParams
    adj: NormalizedAdjacency
    inputs: list[np.ndarray] = field(default_factory=list)   # A_hat @ z_l per layer
    acts: list[np.ndarray] = field(default_factory=list)     # z_0 .. z_L


def init_params(layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES, in_features: int = 1,
                seed=None, readout: bool = False, skip: bool = False) -> GcnParams:
    """Glorot-uniform weights for every layer and the head. The skip vector
    starts at zero."""
    sizes = tuple(int(s) for s in layer_sizes)
    if not sizes:
        raise ValueError("layer_sizes must be nonempty")
    rng = np.random.default_rng(seed)
    layers = []
    fan_in = in_features
    for width in sizes:
        bound = math.sqrt(6.0 / (fan_in + width))
        layers.append(rng.uniform(-bound, bound, size=(fan_in, width)))
        fan_in = width
    bound = math.sqrt(6.0 / (fan_in + 1))
    head = rng.uniform(-bound, bound, size=fan_in)
    ro = rng.uniform(-bound, bound, size=fan_in) if readout else None
    sk = np.zeros(2 * int(in_features)) if skip else None
    seed_val = int(seed) if isinstance(seed, (int, np.integer)) else None
    return GcnParams(layers, head, sizes, int(in_features), seed_val, ro, sk)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def forward(params: GcnParams, adj: NormalizedAdjacency, features: np.ndarray):
    """Return ``(per_node, pooled, cache)``; ``pooled`` sums over nodes."""
    z = np.asarray(features, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[-2] != adj.n:
        raise ValueError(f"features have {z.shape[-2]} nodes, adjacency has {adj.n}")
    cache = ForwardCache(params, adj)
    cache.acts.append(z)
    for i, w in enumerate(params.layers):
        if z.shape[-1] != w.shape[0]:
            raise ValueError(
                f"layer {i}: input width {z.shape[-1]} does not match weight rows {w.shape[0]}"
            )
        az = adj.matmul(z)
        z = _sigmoid(az @ w)
        cache.inputs.append(az)
        cache.acts.append(z)
    if z.shape[-1] != params.head.shape[0]:
        raise ValueError(f"head: width {z.shape[-1]} does not match {params.head.shape[0]}")
    per_node = z @ params.head
    if params.readout is not None:
        per_node = per_node + (z.mean(axis=-2) @ params.readout)[..., None]
    if params.skip is not None:
        x = cache.acts[0]
        f = x.shape[-1]
        per_node = (per_node + x @ params.skip[:f]
                    + (x.mean(axis=-2) @ params.skip[f:])[..., None])
    pooled = per_node.sum(axis=-1)
    return per_node, pooled, cache


def backward(params: GcnParams, cache: ForwardCache, grad_per_node=None,
             grad_pooled=None) -> Gradients:
    """Reverse-mode gradients of ``sum(grad_per_node * per_node) + sum(grad_pooled * pooled)``."""
    if cache.params is not params:
        raise StaleCacheError("cache was produced by a different parameter object")
    z_last = cache.acts[-1]
    node_shape = z_last.shape[:-1]
    g = np.zeros(node_shape)
    if grad_per_node is not None:
        g = g + np.asarray(grad_per_node, dtype=np.float64).reshape(node_shape)
    if grad_pooled is not None:
        gp = np.asarray(grad_pooled, dtype=np.float64)
        g = g + (gp[..., None] if gp.ndim else gp)
    axes = list(range(g.ndim))
    head_grad = np.tensordot(g, z_last, axes=(axes, axes))
    dz = g[..., None] * params.head
    readout_grad = None
    if params.readout is not None:
        g_sum = g.sum(axis=-1)                       # per graph
        mean_z = z_last.mean(axis=-2)
        readout_grad = np.tensordot(g_sum, mean_z, axes=(axes[:-1], axes[:-1]))
        dz = dz + (g_sum[..., None] * params.readout / z_last.shape[-2])[..., None, :]
    skip_grad = None
    if params.skip is not None:
        x = cache.acts[0]
        skip_grad = np.concatenate([
            np.tensordot(g, x, axes=(axes, axes)),
            np.tensordot(g.sum(axis=-1), x.mean(axis=-2), axes=(axes[:-1], axes[:-1])),
        ])
    layer_grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        z = cache.acts[i + 1]
        dh = dz * z * (1.0 - z)
        az = cache.inputs[i]
        lead = list(range(dh.ndim - 1))
        layer_grads[i] = np.tensordot(az, dh, axes=(lead, lead))
        if i > 0:
            dz = cache.adj.rmatmul(dh @ params.layers[i].T)
    return Gradients(layer_grads, head_grad, readout_grad, skip_grad)


def sgd_step(params: GcnParams, grads: Gradients, lr: float) -> GcnParams:
    return params.with_arrays([w - lr * g for w, g in zip(params.arrays(), grads.arrays())])


class Adam:
    """Adam moment estimates for one parameter set."""

    def __init__(self, params: GcnParams, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: GcnParams, grads: Gradients, lr: float) -> GcnParams:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        new = []
        for i, (w, g) in enumerate(zip(params.arrays(), grads.arrays())):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            new.append(w - lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        return params.with_arrays(new)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def params_to_dict(params: GcnParams, norm_mode: str) -> dict:
    return {
        "layer_sizes": list(params.layer_sizes),
        "in_features": params.in_features,
        "normalization": norm_mode,
        "seed": params.seed,
        "layers": [w.tolist() for w in params.layers],
        "head": params.head.tolist(),
        "readout": None if params.readout is None else params.readout.tolist(),
        "skip": None if params.skip is None else params.skip.tolist(),
    }


def params_from_dict(doc: dict) -> tuple[GcnParams, str]:
    params = GcnParams(
        [np.asarray(w, dtype=np.float64).reshape(len(w), -1) for w in doc["layers"]],
        np.asarray(doc["head"], dtype=np.float64),
        tuple(doc["layer_sizes"]),
        int(doc["in_features"]),
        doc.get("seed"),
        None if doc.get("readout") is None else np.asarray(doc["readout"], dtype=np.float64),
        None if doc.get("skip") is None else np.asarray(doc["skip"], dtype=np.float64),
    )
    params.validate()
    mode = doc.get("normalization", "symmetric_selfloops")
    if mode not in NORM_MODES:
        raise ValueError(f"unknown normalization mode {mode!r} in checkpoint")
    return params, mode


def save_params(params: GcnParams, path: str | Path, norm_mode: str = "symmetric_selfloops") -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, norm_mode), indent=1) + "\n")


def load_params(path: str | Path) -> tuple[GcnParams, str]:
    return params_from_dict(json.loads(Path(path).read_text()))
