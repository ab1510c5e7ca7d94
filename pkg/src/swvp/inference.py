"""
Exact argmax decoding over Y(x) = [C_y]^L.

``viterbi_argmax`` runs the O(L * C_y^2) dynamic program; ``enumerate_argmax``
scores every labeling and serves as the test oracle. Both return the
lexicographically smallest labeling among equal-scoring maximizers.
"""

import itertools

import numpy as np

from . import _kernels
from .features import SparseVector, StructureError

DEFAULT_ENUMERATION_CAP = 100_000


class EnumerationCapError(RuntimeError):
    """|Y(x)| exceeds the configured enumeration cap."""


class LabelSpace:
    """All labelings of length ``length`` over labels 1..n_labels, in lexicographic order."""

    def __init__(self, n_labels, length):
        if n_labels < 1 or length < 1:
            raise ValueError("n_labels and length must be positive")
        self.n_labels = int(n_labels)
        self.length = int(length)

    @property
    def size(self):
        return self.n_labels**self.length

    def __len__(self):
        return self.size

    def __iter__(self):
        for lab in itertools.product(range(1, self.n_labels + 1), repeat=self.length):
            yield np.array(lab, dtype=np.int64)

    def array(self, cap=DEFAULT_ENUMERATION_CAP):
        """Every labeling as rows of an ``(n_labels**length, length)`` array."""
        if self.size > cap:
            raise EnumerationCapError(
                f"{self.n_labels}^{self.length} = {self.size} labelings exceeds cap {cap}"
            )
        grids = np.indices((self.n_labels,) * self.length).reshape(self.length, -1).T
        return (grids + 1).astype(np.int64)


def as_dense(w, index):
    if isinstance(w, SparseVector):
        return w.to_dense(index.size)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (index.size,):
        raise StructureError(f"weight vector has shape {w.shape}, expected ({index.size},)")
    return w


def _prepare(x, index):
    x = np.ascontiguousarray(x, dtype=np.int64)
    if x.ndim != 1 or x.size == 0:
        raise StructureError("x must be a non-empty 1-D sequence")
    index.check_observations(x)
    return x


def viterbi_argmax(x, w, index):
    """Highest-scoring labeling of ``x`` under weights ``w`` (ties: lexicographically smallest)."""
    x = _prepare(x, index)
    return _kernels.decode(as_dense(w, index), x, index.offsets, index.n_labels)


def decode_many(X, w, index):
    """Row-wise ``viterbi_argmax`` for an ``(n, L)`` array of observation sequences."""
    X = np.ascontiguousarray(X, dtype=np.int64)
    index.check_observations(X)
    return _kernels.decode_batch(as_dense(w, index), X, index.offsets, index.n_labels)


def position_scores(x, labelings, w, index):
    """Per-position factor scores, summing the six template weights left to right."""
    ids = index.position_ids(np.asarray(x)[None, :], np.atleast_2d(labelings))
    g = w[ids]
    s = g[..., 0]
    for t in range(1, 6):
        s = s + g[..., t]
    return s


def sequence_scores(x, labelings, w, index):
    """w . phi(x, z) for every row z, accumulated right to left over positions."""
    w = as_dense(w, index)
    s = position_scores(x, labelings, w, index)
    acc = np.zeros(s.shape[0])
    for i in range(s.shape[1] - 1, -1, -1):
        acc = s[:, i] + acc
    return acc


def score(x, y, w, index):
    return float(sequence_scores(x, np.asarray(y)[None, :], w, index)[0])


def enumerate_argmax(x, w, index, cap=DEFAULT_ENUMERATION_CAP):
    """Score every labeling in lexicographic order and return the first maximizer."""
    x = _prepare(x, index)
    Z = LabelSpace(index.n_labels, x.size).array(cap)
    scores = sequence_scores(x, Z, w, index)
    return Z[int(np.argmax(scores))].copy()
