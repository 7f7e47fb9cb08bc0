"""Single-layer LSTM classifier trained by backpropagation through time.

Many-to-one: the softmax read-out sees only the final hidden state.
Gates are packed [input, forget, cell, output] along one axis so each
step is two matmuls. Training uses Adam with global-norm gradient
clipping; every source of randomness (init, epoch shuffles) is a pure
function of the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import GraspState
from .features import SequenceSample
from .seeding import derive_seed

N_CLASSES = len(GraspState)


@dataclass(frozen=True)
class LstmHyperparams:
    seq_len: int = 15
    learning_rate: float = 5e-4
    n_layers: int = 1
    epochs: int = 30
    hidden_size: int = 64
    batch_size: int = 32
    grad_clip_norm: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")
        if self.n_layers != 1:
            raise ValueError("only a single recurrent layer is supported")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.hidden_size < 1 or self.batch_size < 1:
            raise ValueError("epochs, hidden_size and batch_size must be >= 1")
        if self.grad_clip_norm <= 0:
            raise ValueError("grad_clip_norm must be positive")


@dataclass
class LstmModel:
    w_x: np.ndarray  # (n_inputs, 4*hidden)
    w_h: np.ndarray  # (hidden, 4*hidden)
    b: np.ndarray  # (4*hidden,)
    w_out: np.ndarray  # (hidden, N_CLASSES)
    b_out: np.ndarray  # (N_CLASSES,)
    n_inputs: int
    hidden_size: int
    seq_len: int

    def check_finite(self) -> None:
        for arr in (self.w_x, self.w_h, self.b, self.w_out, self.b_out):
            if not np.isfinite(arr).all():
                raise ValueError("model holds non-finite parameters")

    def param_items(self) -> list:
        return [
            ("w_x", self.w_x),
            ("w_h", self.w_h),
            ("b", self.b),
            ("w_out", self.w_out),
            ("b_out", self.b_out),
        ]


def init_model(n_inputs: int, hp: LstmHyperparams) -> LstmModel:
    """Uniform +-1/sqrt(hidden) weights, zero biases."""
    rng = np.random.default_rng(hp.seed & ((1 << 64) - 1))
    s = 1.0 / math.sqrt(hp.hidden_size)
    h4 = 4 * hp.hidden_size
    return LstmModel(
        w_x=rng.uniform(-s, s, size=(n_inputs, h4)),
        w_h=rng.uniform(-s, s, size=(hp.hidden_size, h4)),
        b=np.zeros(h4),
        w_out=rng.uniform(-s, s, size=(hp.hidden_size, N_CLASSES)),
        b_out=np.zeros(N_CLASSES),
        n_inputs=n_inputs,
        hidden_size=hp.hidden_size,
        seq_len=hp.seq_len,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_batch(model: LstmModel, X: np.ndarray) -> tuple:
    """Run a (batch, seq_len, n_inputs) block; returns (probs, cache).

    Initial hidden and cell states are zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != model.n_inputs:
        raise ValueError(f"X must be (batch, T, {model.n_inputs})")
    B, T, _ = X.shape
    H = model.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    gates_i = np.empty((T, B, H))
    gates_f = np.empty((T, B, H))
    gates_g = np.empty((T, B, H))
    gates_o = np.empty((T, B, H))
    cells = np.empty((T, B, H))
    hiddens = np.empty((T, B, H))
    for t in range(T):
        z = X[:, t, :] @ model.w_x + h @ model.w_h + model.b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = i, f, g, o
        cells[t] = c
        hiddens[t] = h
    logits = h @ model.w_out + model.b_out
    logp = _log_softmax(logits)
    probs = np.exp(logp)
    cache = {
        "X": X,
        "i": gates_i,
        "f": gates_f,
        "g": gates_g,
        "o": gates_o,
        "c": cells,
        "h": hiddens,
        "logp": logp,
        "probs": probs,
    }
    return probs, cache


def lstm_forward(model: LstmModel, sequence: np.ndarray) -> tuple:
    """Class probabilities for one (seq_len, n_inputs) sequence."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2:
        raise ValueError("sequence must be 2-D (seq_len, n_inputs)")
    probs, cache = forward_batch(model, seq[None, :, :])
    return probs[0], cache


def backward_batch(model: LstmModel, cache: dict, labels: np.ndarray) -> tuple:
    """Gradients of the mean cross-entropy over the batch.

    Returns (grads dict keyed like param_items, mean loss).
    """
    X = cache["X"]
    B, T, _ = X.shape
    H = model.hidden_size
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (B,):
        raise ValueError("labels must match the batch size")

    loss = float(-cache["logp"][np.arange(B), labels].mean())
    dlogits = cache["probs"].copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B

    h_last = cache["h"][T - 1]
    grads = {
        "w_out": h_last.T @ dlogits,
        "b_out": dlogits.sum(axis=0),
        "w_x": np.zeros_like(model.w_x),
        "w_h": np.zeros_like(model.w_h),
        "b": np.zeros_like(model.b),
    }
    dh = dlogits @ model.w_out.T
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        c = cache["c"][t]
        c_prev = cache["c"][t - 1] if t > 0 else np.zeros((B, H))
        h_prev = cache["h"][t - 1] if t > 0 else np.zeros((B, H))
        tanh_c = np.tanh(c)
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        grads["w_x"] += X[:, t, :].T @ dz
        grads["w_h"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh = dz @ model.w_h.T
        dc = dc * f
    return grads, loss


def lstm_backward(model: LstmModel, cache: dict, label) -> dict:
    """Parameter gradients of one sequence's cross-entropy loss."""
    grads, _ = backward_batch(model, cache, np.asarray([int(label)]))
    return grads


def _clip_global_norm(grads: dict, max_norm: float) -> None:
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale


def _ordered_samples(samples: Sequence[SequenceSample]) -> list:
    return sorted(samples, key=lambda s: (s.trial_id, s.end_frame))


def lstm_train(
    samples: Sequence[SequenceSample], hp: Optional[LstmHyperparams] = None
) -> tuple:
    """Train on labeled sequences; returns (model, per-epoch loss trace).

    Samples are canonically ordered before training and reshuffled each
    epoch by a generator derived from (seed, epoch), so storage order
    never changes the result.
    """
    hp = hp or LstmHyperparams()
    if len(samples) == 0:
        raise ValueError("no training sequences")
    ordered = _ordered_samples(samples)
    X = np.stack([s.values for s in ordered]).astype(float)
    y = np.asarray([int(s.label) for s in ordered], dtype=np.int64)
    if X.ndim != 3 or X.shape[1] != hp.seq_len:
        raise ValueError(f"sequences must be (n, {hp.seq_len}, width)")
    if len(np.unique(y)) < 2:
        raise ValueError("training labels span fewer than two classes")
    n, _, width = X.shape

    model = init_model(width, hp)
    m_state = {k: np.zeros_like(v) for k, v in model.param_items()}
    v_state = {k: np.zeros_like(v) for k, v in model.param_items()}
    params = dict(model.param_items())
    step = 0
    trace = []
    for epoch in range(hp.epochs):
        rng = np.random.default_rng(derive_seed(hp.seed, "epoch", epoch))
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hp.batch_size):
            batch = perm[start : start + hp.batch_size]
            _, cache = forward_batch(model, X[batch])
            grads, loss = backward_batch(model, cache, y[batch])
            epoch_loss += loss * len(batch)
            _clip_global_norm(grads, hp.grad_clip_norm)
            step += 1
            b1c = 1.0 - hp.adam_beta1**step
            b2c = 1.0 - hp.adam_beta2**step
            for key, p in params.items():
                g = grads[key]
                m_state[key] = hp.adam_beta1 * m_state[key] + (1 - hp.adam_beta1) * g
                v_state[key] = hp.adam_beta2 * v_state[key] + (1 - hp.adam_beta2) * (
                    g * g
                )
                p -= hp.learning_rate * (m_state[key] / b1c) / (
                    np.sqrt(v_state[key] / b2c) + hp.adam_eps
                )
        trace.append(epoch_loss / n)
    model.check_finite()
    return model, trace


def lstm_predict(model: LstmModel, sequence: np.ndarray) -> GraspState:
    """Most probable class; ties fall to canonical order."""
    probs, _ = lstm_forward(model, sequence)
    return GraspState(int(np.argmax(probs)))


def predict_batch(model: LstmModel, X: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """lstm_predict over (n, seq_len, width) in fixed-size chunks."""
    X = np.asarray(X, dtype=float)
    out = np.empty(len(X), dtype=np.int64)
    for start in range(0, len(X), chunk):
        probs, _ = forward_batch(model, X[start : start + chunk])
        out[start : start + chunk] = np.argmax(probs, axis=1)
    return out
