"""Minimal feed-forward networks on flat parameter vectors.

Everything trainable in this package is an MLP whose parameters live in one
flat float32 vector, laid out layer by layer as the row-major weight matrix
followed by the bias vector. That layout is a serialization contract (blobs
in repertoire snapshots are these vectors verbatim), so it never changes.

The math is written against a stacked representation: a whole population of
identically shaped networks is a (pop, num_params) array, and inputs are
(pop, batch, in_dim). Single-network calls are the pop=1 special case of the
same kernels, so the per-agent code path and the vectorized population code
path share every floating point operation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpSpec:
    """Shapes and activations of one fully connected network."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def num_params(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def layer_layout(self) -> list[tuple[int, int, int, int]]:
        """Per layer: (offset, in_dim, out_dim, end_offset) into the flat vector."""
        layout = []
        off = 0
        for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            end = off + (i + 1) * o
            layout.append((off, i, o, end))
            off = end
        return layout


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Fresh float32 parameters, uniform in +-1/sqrt(fan_in) per layer.

    Weights are drawn before biases within each layer so the stream of draws
    is pinned down by the layout alone.
    """
    chunks = []
    for _, i, o, _ in spec.layer_layout():
        bound = 1.0 / np.sqrt(i)
        chunks.append(rng.uniform(-bound, bound, size=(i + 1) * o))
    return np.concatenate(chunks).astype(np.float32)


def _check_params(spec: MlpSpec, params: np.ndarray, stacked: bool) -> None:
    want = spec.num_params
    got = params.shape[-1] if params.ndim else -1
    if (stacked and params.ndim != 2) or (not stacked and params.ndim != 1) or got != want:
        raise ValueError(
            f"parameter vector of length {want} expected for {spec.layer_sizes}, "
            f"got array of shape {params.shape}"
        )


def _views(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """(W, b) views per layer of a stacked (pop, num_params) array."""
    pop = params.shape[0]
    out = []
    for off, i, o, _ in spec.layer_layout():
        w = params[:, off : off + i * o].reshape(pop, i, o)
        b = params[:, off + i * o : off + (i + 1) * o]
        out.append((w, b))
    return out


def _apply_hidden(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def forward_acts(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> list[np.ndarray]:
    """Stacked forward pass keeping the per-layer activations.

    acts[l] is the input of layer l and acts[-1] the network output; handing
    the list to backward_stacked skips its internal forward recomputation.
    """
    _check_params(spec, params, stacked=True)
    a = x
    acts = [x]
    views = _views(spec, params)
    last = len(views) - 1
    for l, (w, b) in enumerate(views):
        z = np.matmul(a, w) + b[:, None, :]
        if l < last:
            a = _apply_hidden(spec.hidden_activation, z)
        elif spec.output_activation == "tanh":
            a = np.tanh(z)
        else:
            a = z
        acts.append(a)
    return acts


def forward_stacked(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Stacked forward pass: params (pop, n), x (pop, batch, in) -> (pop, batch, out)."""
    return forward_acts(spec, params, x)[-1]


def backward_stacked(
    spec: MlpSpec,
    params: np.ndarray,
    x: np.ndarray,
    upstream: np.ndarray,
    acts: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian product through the stacked network.

    Returns (param_grads, input_grads) with param grads summed over the batch
    axis, shapes (pop, num_params) and (pop, batch, in). Callers that already
    ran the forward pass can hand over its forward_acts list.
    """
    _check_params(spec, params, stacked=True)
    views = _views(spec, params)
    last = len(views) - 1

    if acts is None:
        acts = forward_acts(spec, params, x)

    if spec.output_activation == "tanh":
        delta = upstream * (1.0 - acts[-1] ** 2)
    else:
        delta = upstream

    grads = np.empty_like(params)
    layout = spec.layer_layout()
    for l in range(last, -1, -1):
        w, _ = views[l]
        a_in = acts[l]
        off, i, o, end = layout[l]
        dw = np.matmul(a_in.transpose(0, 2, 1), delta)
        db = delta.sum(axis=1)
        pop = params.shape[0]
        grads[:, off : off + i * o] = dw.reshape(pop, i * o)
        grads[:, off + i * o : end] = db
        dx = np.matmul(delta, w.transpose(0, 2, 1))
        if l > 0:
            # acts[l] came out of the hidden activation of layer l-1
            if spec.hidden_activation == "relu":
                dx = dx * (acts[l] > 0)
            else:
                dx = dx * (1.0 - acts[l] ** 2)
            delta = dx
        else:
            input_grads = dx
    return grads, input_grads


def forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Forward pass for one network. x is (in,) or (batch, in)."""
    _check_params(spec, params, stacked=False)
    single = x.ndim == 1
    x3 = x[None, None, :] if single else x[None, :, :]
    out = forward_stacked(spec, params[None, :], x3)
    return out[0, 0] if single else out[0]


def backward(
    spec: MlpSpec, params: np.ndarray, x: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """VJP for one network; upstream matches forward's output shape."""
    _check_params(spec, params, stacked=False)
    single = x.ndim == 1
    x3 = x[None, None, :] if single else x[None, :, :]
    up3 = upstream[None, None, :] if single else upstream[None, :, :]
    grads, dx = backward_stacked(spec, params[None, :], x3, up3)
    return (grads[0], dx[0, 0] if single else dx[0])


@dataclass
class AdamState:
    """Adam moments for a stack of parameter vectors (pop=1 for one agent)."""

    m: np.ndarray
    v: np.ndarray
    step: np.ndarray  # (pop,) int64, per-row so masked rows can lag

    @classmethod
    def zeros(cls, pop: int, num_params: int) -> "AdamState":
        return cls(
            m=np.zeros((pop, num_params), dtype=np.float32),
            v=np.zeros((pop, num_params), dtype=np.float32),
            step=np.zeros(pop, dtype=np.int64),
        )


class AdamResult(NamedTuple):
    state: AdamState
    params: np.ndarray
    skipped: np.ndarray  # (pop,) bool, rows whose grads were non-finite


def adam_step(
    state: AdamState,
    params: np.ndarray,
    grads: np.ndarray,
    lr: float | np.ndarray,
    mask: np.ndarray | None = None,
) -> AdamResult:
    """One Adam update. Pure: inputs are never mutated.

    lr is a scalar or a (pop,) array. mask (pop,) selects rows to update;
    unmasked rows keep params and moments untouched. Rows with non-finite
    grads are skipped and flagged.
    """
    pop = params.shape[0]
    finite = np.isfinite(grads).all(axis=1)
    active = finite if mask is None else (finite & mask)
    skipped = ~finite if mask is None else (mask & ~finite)

    step = state.step + np.where(active, 1, 0)
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * np.square(grads)
    corr1 = (1.0 - ADAM_BETA1 ** np.maximum(step, 1)).astype(np.float32)
    corr2 = (1.0 - ADAM_BETA2 ** np.maximum(step, 1)).astype(np.float32)
    m_hat = m / corr1[:, None]
    v_hat = v / corr2[:, None]
    lr_col = np.broadcast_to(np.asarray(lr, dtype=np.float32), (pop,))[:, None]
    stepped = params - lr_col * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    if active.all():
        # selecting against an all-true mask is the identity, so skip it
        return AdamResult(
            AdamState(m, v, step), stepped.astype(params.dtype, copy=False), skipped
        )
    keep = active[:, None]
    new_params = np.where(keep, stepped, params).astype(params.dtype, copy=False)
    new_m = np.where(keep, m, state.m)
    new_v = np.where(keep, v, state.v)
    return AdamResult(AdamState(new_m, new_v, step), new_params, skipped)
