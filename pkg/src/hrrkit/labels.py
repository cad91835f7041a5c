"""Dense label encoding, the query loss, and decoding for multi-label tasks.

A task with L classes is represented in d' << L dimensions by fixed random
unitary vectors: one per class (c_i), a shared "present" role p, and a
"missing" role m orthogonal to p. A label set maps to the statement

    s = p (x) sum_{i in present} c_i + w * m (x) (A - sum_{i in present} c_i)

where A = sum_i c_i is the all-classes vector and w = 1/sqrt(|absent|)
scales the absent bundle to unit expected norm. Without w the absent
bundle's norm grows like sqrt(L) and drowns present-class queries, making
round-trip decoding fail at realistic L; the scaling keeps the decoder's
signal-to-noise ratio independent of L while the two-term structure and
the O(|present|) shortcut through A are unchanged.

The loss never needs the encoded target: it queries the prediction
directly. Unbinding the present role should reveal every present class
vector (cosine near one), and unbinding the missing role should reveal
nothing about them (cosine near zero). Class vectors are regenerated from
a counter-based seed on demand, so no L x d' matrix is ever stored.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import core
from .seeds import mix64

__all__ = [
    "LabelSpace",
    "LossBreakdown",
    "class_scores",
    "decode_threshold",
    "decode_topk",
    "encode_labels",
    "loss",
    "loss_gradient",
    "loss_with_gradient",
    "make_label_space",
    "query_loss_terms",
]

_CLASS_BLOCK = 512  # classes regenerated per chunk when streaming


@dataclasses.dataclass(frozen=True)
class LossBreakdown:
    """Two-part query loss; degenerate marks an empty present set."""

    j_p: float
    j_n: float
    degenerate: bool = False

    @property
    def total(self):
        return self.j_p + self.j_n


class LabelSpace:
    """Fixed random role and class vectors for one labeling task.

    Immutable after construction and safe to share across threads. Class
    vectors are deterministic functions of (seed, class index) and are
    regenerated on demand rather than stored.
    """

    def __init__(self, n_classes, dim, seed):
        if n_classes < 1:
            raise ValueError(f"class count must be >= 1, got {n_classes}")
        if dim < 2:
            raise ValueError(f"dimension must be >= 2, got {dim}")
        self.n_classes = int(n_classes)
        self.dim = int(dim)
        self.seed = int(seed)
        self.p = core.sample_unitary(self.dim, mix64(self.seed, self.n_classes, 1))
        raw = core.sample_unitary(self.dim, mix64(self.seed, self.n_classes, 2))
        # Orthogonalize the second unitary draw against p and restore its
        # norm; the result is no longer exactly unitary, which is fine
        # because only p is unbound with the permutation inverse.
        p_hat = self.p / np.linalg.norm(self.p)
        m = raw - (raw @ p_hat) * p_hat
        self.m = m * (np.linalg.norm(self.p) / np.linalg.norm(m))
        self.all_classes = self._sum_all_classes()

    def class_seed(self, index):
        return mix64(self.seed, index)

    def class_vectors(self, indices):
        """Regenerate class vectors for the given indices, one per row."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        self._check_indices(indices)
        rows = np.empty((indices.size, self.dim))
        for k, i in enumerate(indices):
            rng = np.random.Generator(np.random.PCG64(self.class_seed(int(i))))
            rows[k] = rng.standard_normal(self.dim)
        return core.project(rows / np.sqrt(self.dim), eps=0.0)

    def class_vector(self, index):
        return self.class_vectors([index])[0]

    def iter_class_blocks(self, block=_CLASS_BLOCK):
        """Yield (start, vectors) chunks covering all classes in order."""
        for start in range(0, self.n_classes, block):
            stop = min(start + block, self.n_classes)
            yield start, self.class_vectors(np.arange(start, stop))

    def _sum_all_classes(self):
        total = np.zeros(self.dim)
        for _, rows in self.iter_class_blocks():
            total += rows.sum(axis=0)
        return total

    def _check_indices(self, indices):
        if indices.size and (indices.min() < 0 or indices.max() >= self.n_classes):
            bad = indices[(indices < 0) | (indices >= self.n_classes)][0]
            raise IndexError(
                f"class index {bad} out of range [0, {self.n_classes})"
            )


def make_label_space(n_classes, dim, seed):
    """Build the fixed vector family for n_classes labels in dim dimensions."""
    return LabelSpace(n_classes, dim, seed)


def _present_array(space, labels):
    arr = np.unique(np.asarray(sorted(labels), dtype=np.int64))
    space._check_indices(arr)
    return arr


def _absent_weight(space, n_present):
    n_absent = space.n_classes - n_present
    return 1.0 / np.sqrt(n_absent) if n_absent > 0 else 1.0


def encode_labels(space, labels):
    """Statement vector for a label set; the ideal network output."""
    present = _present_array(space, labels)
    if present.size:
        bundle = space.class_vectors(present).sum(axis=0)
    else:
        bundle = np.zeros(space.dim)
    w = _absent_weight(space, present.size)
    return core.bind(space.p, bundle) + w * core.bind(
        space.m, space.all_classes - bundle
    )


def _cosines_and_grads(u, rows):
    # cos_eps(u, v) = <u, v> / (|u||v| + eps) per row, plus gradients in u.
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(rows, axis=1)
    den = nu * nv + core.COSINE_EPS
    cs = (rows @ u) / den
    grads = (rows - np.outer(cs * nv / max(nu, 1e-300), u)) / den[:, None]
    return cs, grads


def query_loss_terms(u_p, u_m, class_rows, absolute=False):
    """Loss terms and gradients in the two unbound query vectors.

    Takes the role-p and role-m unbindings of a prediction plus the present
    class vectors (one per row) and returns (j_p, j_n, g_up, g_um). This is
    the transform-free core shared by the reference per-example loss and
    the trainer's batched path.
    """
    cs, grads = _cosines_and_grads(u_p, class_rows)
    if absolute:
        j_p = float(np.sum(1.0 - np.abs(cs)))
        g_up = -(np.sign(cs)[:, None] * grads).sum(axis=0)
    else:
        j_p = float(np.sum(1.0 - cs))
        g_up = -grads.sum(axis=0)
    bundle = class_rows.sum(axis=0)
    cs_n, grads_n = _cosines_and_grads(u_m, bundle[None, :])
    c_n = float(cs_n[0])
    if absolute:
        j_n = abs(c_n)
        g_um = np.sign(c_n) * grads_n[0]
    else:
        j_n = c_n
        g_um = grads_n[0]
    return j_p, j_n, g_up, g_um


def loss(space, s_hat, labels, absolute=False):
    """Query loss of a predicted statement against a label set.

    The present term sums 1 - cos between the role-p unbinding and each
    present class vector; the absent term is the cosine between the role-m
    unbinding and the sum of present class vectors. With absolute=True
    the cosines are replaced by their magnitudes (the reference-code
    variant); that form trains to the same loss values but lets present
    classes converge anti-aligned, which the dot-product decoder cannot
    rank, so the signed form is the default. An empty present set is
    degenerate: both terms are zero and the breakdown is flagged.
    """
    breakdown, _ = loss_with_gradient(space, s_hat, labels, absolute=absolute)
    return breakdown


def loss_gradient(space, s_hat, labels, absolute=False):
    """Gradient of the total query loss with respect to the prediction."""
    _, grad = loss_with_gradient(space, s_hat, labels, absolute=absolute)
    return grad


def loss_with_gradient(space, s_hat, labels, absolute=False, class_rows=None):
    """Loss breakdown and its prediction gradient in one pass.

    class_rows may carry the present class vectors (in sorted index order)
    to skip regeneration inside training loops.
    """
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if s_hat.shape != (space.dim,):
        raise ValueError(f"prediction must have shape ({space.dim},)")
    present = _present_array(space, labels)
    if present.size == 0:
        return LossBreakdown(0.0, 0.0, degenerate=True), np.zeros(space.dim)
    u_p = core.unbind(s_hat, space.p)
    u_m = core.unbind(s_hat, space.m)
    if class_rows is None:
        class_rows = space.class_vectors(present)
    j_p, j_n, g_up, g_um = query_loss_terms(u_p, u_m, class_rows, absolute)
    # u_p = s_hat (x) p*, so the adjoint maps the u_p gradient back through
    # a plain binding with p (and likewise for m).
    grad = core.bind(g_up, space.p) + core.bind(g_um, space.m)
    return LossBreakdown(j_p=j_p, j_n=j_n), grad


def class_scores(space, s_hat):
    """Dot products of every class vector with the role-p unbinding.

    Scores are computed by streaming class regeneration in fixed-size
    blocks; memory stays O(block * dim) plus the L-vector of scores.
    """
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if s_hat.shape != (space.dim,):
        raise ValueError(f"prediction must have shape ({space.dim},)")
    query = core.unbind(s_hat, space.p)
    scores = np.empty(space.n_classes)
    for start, rows in space.iter_class_blocks():
        scores[start : start + rows.shape[0]] = rows @ query
    return scores


def decode_topk(space, s_hat, k):
    """Indices of the k highest-scoring classes, ties broken by lower index."""
    if not 1 <= k <= space.n_classes:
        raise ValueError(f"k must be in [1, {space.n_classes}], got {k}")
    scores = class_scores(space, s_hat)
    order = np.argsort(-scores, kind="stable")
    return order[:k].tolist()


def decode_threshold(space, s_hat, tau=0.5):
    """Sorted indices of all classes scoring strictly above tau."""
    scores = class_scores(space, s_hat)
    return np.nonzero(scores > tau)[0].tolist()
