"""From-scratch feedforward trainer with interchangeable output heads.

The body is input -> hidden -> hidden with ReLU activations. The "fc"
head emits one logit per label and trains with mean binary cross entropy;
the "hrr" head emits a d'-dimensional statement vector and trains with the
query loss from hrrkit.labels, which chains into the linear layers through
its analytic gradient. The first layer consumes sparse features directly,
touching only the nonzero rows of the weight matrix.

Training is plain mini-batch Adam with seeded shuffling, bit-reproducible
for a fixed seed in single-threaded use.
"""

from __future__ import annotations

import dataclasses
import json
import struct
import time

import numpy as np

from . import core
from . import labels as labelcodec
from .seeds import mix64

__all__ = [
    "EpochStats",
    "MlpModel",
    "TrainConfig",
    "TrainingDivergedError",
    "bce_loss",
    "compression_percent",
    "forward",
    "init_model",
    "load_checkpoint",
    "param_count",
    "predict_rankings",
    "save_checkpoint",
    "train",
]

_MAGIC = b"HRRMLP1\n"
_FORMAT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclasses.dataclass
class MlpModel:
    weights: list  # per layer, shape (fan_in, fan_out)
    biases: list  # per layer, shape (fan_out,)
    head: str  # "fc" or "hrr"

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def out_dim(self):
        return self.weights[-1].shape[1]


@dataclasses.dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    dropout: float = 0.0
    seed: int = 0
    absolute_cosine: bool = False  # hrr head loss variant; see labels.loss

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValueError("epochs, batch size, and lr must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


@dataclasses.dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    seconds: float
    val_p1: float | None = None


def init_model(n_features, hidden, out_dim, head, seed):
    """Kaiming-uniform weights (fan-in scaled for ReLU), zero biases."""
    if head not in ("fc", "hrr"):
        raise ValueError(f"head must be 'fc' or 'hrr', got {head!r}")
    sizes = [int(n_features), *map(int, hidden), int(out_dim)]
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights=weights, biases=biases, head=head)


def _forward_sparse(model, batch, dropout=0.0, rng=None):
    """Forward pass over a list of SparseExample, returning the layer cache.

    The first layer gathers only the weight rows of active features; later
    layers are dense matrix products.
    """
    w1, b1 = model.weights[0], model.biases[0]
    z1 = np.tile(b1, (len(batch), 1))
    for row, ex in enumerate(batch):
        if ex.feat_idx.size:
            z1[row] += ex.feat_val @ w1[ex.feat_idx]
    acts = [None, z1]
    a = np.maximum(z1, 0.0)
    masks = [None]
    a, mask = _dropout(a, dropout, rng)
    masks.append(mask)
    for w, b in zip(model.weights[1:-1], model.biases[1:-1]):
        z = a @ w + b
        acts.append(z)
        a = np.maximum(z, 0.0)
        a, mask = _dropout(a, dropout, rng)
        masks.append(mask)
    out = a @ model.weights[-1] + model.biases[-1]
    return out, acts, masks


def _dropout(a, rate, rng):
    if rate <= 0.0 or rng is None:
        return a, None
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return a * mask, mask


def forward(model, feat_idx, feat_val):
    """Output vector for one sparse example (logits or statement vector)."""
    if len(feat_idx) and max(feat_idx) >= model.weights[0].shape[0]:
        raise ValueError("feature index out of range for this model")
    ex = _Example(
        np.asarray(feat_idx, dtype=np.int64), np.asarray(feat_val, dtype=np.float64)
    )
    out, _, _ = _forward_sparse(model, [ex])
    return out[0]


@dataclasses.dataclass
class _Example:
    feat_idx: np.ndarray
    feat_val: np.ndarray


def _backward_sparse(model, batch, acts, masks, grad_out):
    """Parameter gradients for a batch given the output gradient."""
    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    relu_acts = []
    for z, mask in zip(acts[1:], masks[1:]):
        a = np.maximum(z, 0.0)
        if mask is not None:
            a = a * mask
        relu_acts.append(a)
    delta = grad_out
    for layer in range(len(model.weights) - 1, 0, -1):
        a_prev = relu_acts[layer - 1]
        grads_w[layer] = a_prev.T @ delta
        grads_b[layer] = delta.sum(axis=0)
        da = delta @ model.weights[layer].T
        if masks[layer] is not None:
            da = da * masks[layer]
        delta = da * (acts[layer] > 0)
    grads_b[0] = delta.sum(axis=0)
    w1_grad = grads_w[0]
    for row, ex in enumerate(batch):
        if ex.feat_idx.size:
            w1_grad[ex.feat_idx] += np.outer(ex.feat_val, delta[row])
    return grads_w, grads_b


def bce_loss(logits, label_set, n_labels):
    """Mean binary cross entropy over all labels, log-sum-exp stabilized."""
    z = np.asarray(logits, dtype=np.float64)
    if z.shape != (n_labels,):
        raise ValueError(f"expected {n_labels} logits, got shape {z.shape}")
    y = np.zeros(n_labels)
    y[np.asarray(list(label_set), dtype=np.int64)] = 1.0
    # -[y log s(z) + (1-y) log(1 - s(z))] = max(z,0) - z y + log(1 + e^-|z|)
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(per.mean())


def _bce_grad(logits, y):
    return (1.0 / (1.0 + np.exp(-logits)) - y) / logits.shape[-1]


def _batch_loss_and_grad(model, batch, out, space, config, class_matrix=None):
    """Mean loss over the batch and the gradient at the output layer.

    Examples with no labels are kept in the forward pass but contribute
    neither loss nor gradient. The hrr head unbinds the whole batch with
    one transform pass and reuses precomputed class vectors when a full
    class matrix fits in memory.
    """
    n_out = out.shape[1]
    grad = np.zeros_like(out)
    losses = []
    if model.head == "fc":
        for row, ex in enumerate(batch):
            if ex.labels.size == 0:
                continue
            y = np.zeros(n_out)
            y[ex.labels] = 1.0
            losses.append(bce_loss(out[row], ex.labels, n_out))
            grad[row] = _bce_grad(out[row], y)
        count = max(len(losses), 1)
        return (sum(losses) / count if losses else 0.0), grad / count
    u_p = core.unbind(out, space.p)
    u_m = core.unbind(out, space.m)
    g_up = np.zeros_like(out)
    g_um = np.zeros_like(out)
    for row, ex in enumerate(batch):
        if ex.labels.size == 0:
            continue
        if class_matrix is not None:
            rows = class_matrix[ex.labels]
        else:
            rows = space.class_vectors(ex.labels)
        j_p, j_n, gp, gm = labelcodec.query_loss_terms(
            u_p[row], u_m[row], rows, absolute=config.absolute_cosine
        )
        losses.append(j_p + j_n)
        g_up[row] = gp
        g_um[row] = gm
    count = max(len(losses), 1)
    grad = (core.bind(g_up, space.p) + core.bind(g_um, space.m)) / count
    return (sum(losses) / count if losses else 0.0), grad


class _Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train(model, dataset, config, space=None, val_dataset=None):
    """Mini-batch training; returns the model and per-epoch statistics.

    The hrr head requires a LabelSpace whose dimension matches the model
    output. Raises TrainingDivergedError as soon as a batch loss is not
    finite.
    """
    if model.head == "hrr":
        if space is None:
            raise ValueError("the hrr head requires a LabelSpace")
        if space.dim != model.out_dim:
            raise ValueError(
                f"label space dim {space.dim} != model output {model.out_dim}"
            )
    elif model.head == "fc" and dataset.n_labels != model.out_dim:
        raise ValueError(
            f"dataset has {dataset.n_labels} labels, model outputs {model.out_dim}"
        )
    params = model.weights + model.biases
    opt = _Adam(params, config.lr, config.beta1, config.beta2, config.adam_eps)
    class_matrix = None
    if model.head == "hrr" and space.n_classes * space.dim <= 4_000_000:
        class_matrix = space.class_vectors(np.arange(space.n_classes))
    shuffle_rng = np.random.Generator(np.random.PCG64(mix64(config.seed, 0xE90C)))
    drop_rng = (
        np.random.Generator(np.random.PCG64(mix64(config.seed, 0xD907)))
        if config.dropout > 0
        else None
    )
    stats = []
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(dataset.n_examples)
        epoch_losses = []
        for lo in range(0, dataset.n_examples, config.batch_size):
            batch = [dataset.examples[i] for i in order[lo : lo + config.batch_size]]
            out, acts, masks = _forward_sparse(
                model, batch, dropout=config.dropout, rng=drop_rng
            )
            loss_value, grad_out = _batch_loss_and_grad(
                model, batch, out, space, config, class_matrix=class_matrix
            )
            if not np.isfinite(loss_value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {lo // config.batch_size}"
                )
            epoch_losses.append(loss_value)
            grads_w, grads_b = _backward_sparse(model, batch, acts, masks, grad_out)
            if config.weight_decay > 0:
                for g, w in zip(grads_w, model.weights):
                    g += config.weight_decay * w
            opt.step(params, grads_w + grads_b)
        val_p1 = None
        if val_dataset is not None:
            rankings = predict_rankings(model, val_dataset, space, k=1)
            hits = [
                1.0 if r[0] in set(ex.labels.tolist()) else 0.0
                for r, ex in zip(rankings, val_dataset.examples)
                if ex.labels.size
            ]
            val_p1 = float(np.mean(hits)) if hits else None
        stats.append(
            EpochStats(
                epoch=epoch,
                mean_loss=float(np.mean(epoch_losses)) if epoch_losses else 0.0,
                seconds=time.perf_counter() - started,
                val_p1=val_p1,
            )
        )
    return model, stats


def predict_rankings(model, dataset, space=None, k=5):
    """Top-k label rankings for every example, best score first.

    For the hrr head, class scores stream through fixed-size blocks of
    regenerated class vectors; ties resolve toward the lower index.
    """
    outs = []
    batchsize = 256
    for lo in range(0, dataset.n_examples, batchsize):
        batch = dataset.examples[lo : lo + batchsize]
        out, _, _ = _forward_sparse(model, batch)
        outs.append(out)
    out = np.concatenate(outs) if outs else np.zeros((0, model.out_dim))
    if model.head == "fc":
        scores = out
    else:
        queries = core.unbind(out, space.p)
        scores = np.empty((dataset.n_examples, space.n_classes))
        for start, rows in space.iter_class_blocks():
            scores[:, start : start + rows.shape[0]] = queries @ rows.T
    k = min(k, scores.shape[1])
    order = np.argsort(-scores, axis=1, kind="stable")
    return [row[:k].tolist() for row in order]


def param_count(model):
    """(output-layer parameters, total parameters), exact integers."""
    out_params = model.weights[-1].size + model.biases[-1].size
    total = sum(w.size for w in model.weights) + sum(b.size for b in model.biases)
    return int(out_params), int(total)


def compression_percent(n_labels, d_prime, hidden_width):
    """Output-layer parameter reduction (%) of the hrr head vs the fc head."""
    fc = hidden_width * n_labels + n_labels
    hrr = hidden_width * d_prime + d_prime
    return 100.0 * (1.0 - hrr / fc)


def save_checkpoint(model, path, extra=None):
    """Versioned binary checkpoint: magic, JSON header, float64 LE blocks."""
    header = {
        "format_version": _FORMAT_VERSION,
        "head": model.head,
        "layer_sizes": model.layer_sizes,
    }
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint; returns (model, header)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a model checkpoint: bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != _FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {header.get('format_version')}"
            )
        sizes = header["layer_sizes"]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            biases.append(b.astype(np.float64))
        trailing = fh.read(1)
        if trailing:
            raise ValueError("checkpoint has trailing bytes; shape mismatch?")
    return MlpModel(weights=weights, biases=biases, head=header["head"]), header
