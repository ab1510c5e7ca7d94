"""
Feature mapping for linear-chain sequence labeling.

Six indicator templates fire at every position i of a sequence:

    x_i, y_i, y_{i-1}, (x_i, y_i), (y_i, y_{i-1}), (x_i, y_i, y_{i-1})

Observations take values 1..C_x and labels 1..C_y. Label id 0 is reserved
for the boundary symbol used as y_0, so every template touching y_{i-1}
ranges over C_y + 1 values. Feature ids are a closed-form mixed-radix
encoding (no hashing), and feature values are occurrence counts.
"""

from dataclasses import dataclass

import numpy as np

N_TEMPLATES = 6
TEMPLATE_NAMES = ("x", "y", "prev", "x_y", "y_prev", "x_y_prev")


class StructureError(ValueError):
    """Inputs with mismatched lengths or out-of-alphabet symbols."""


def _frozen(a):
    a.setflags(write=False)
    return a


class SparseVector:
    """
    Feature-indexed real vector in canonical form.

    Indices are sorted and unique and no stored value is zero. Instances
    are immutable; arithmetic returns new vectors.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices=(), values=(), *, _canonical=False):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise StructureError("indices and values differ in length")
        if not _canonical:
            idx, val = _canonicalize(idx, val)
        self.indices = _frozen(idx)
        self.values = _frozen(val)

    @classmethod
    def from_dict(cls, entries):
        if not entries:
            return cls()
        keys = np.fromiter(entries.keys(), dtype=np.int64, count=len(entries))
        vals = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
        return cls(keys, vals)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        nz = np.flatnonzero(dense)
        return cls(nz, dense[nz].copy(), _canonical=True)

    @classmethod
    def linear_combination(cls, vectors, coefs):
        """Sum of coef * vector, accumulated in the order given."""
        parts = [(v.indices, c * v.values) for v, c in zip(vectors, coefs)]
        if not parts:
            return cls()
        idx = np.concatenate([p[0] for p in parts])
        val = np.concatenate([p[1] for p in parts])
        return cls(idx, val)

    def to_dict(self):
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self, size):
        out = np.zeros(size, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def dot(self, other):
        """Inner product with another SparseVector or a dense array."""
        if isinstance(other, SparseVector):
            common, ia, ib = np.intersect1d(
                self.indices, other.indices, assume_unique=True, return_indices=True
            )
            if common.size == 0:
                return 0.0
            return float(np.dot(self.values[ia], other.values[ib]))
        other = np.asarray(other, dtype=np.float64)
        if self.indices.size == 0:
            return 0.0
        return float(np.dot(other[self.indices], self.values))

    def norm(self):
        return float(np.sqrt(np.dot(self.values, self.values)))

    def sq_norm(self):
        return float(np.dot(self.values, self.values))

    def total(self):
        return float(self.values.sum())

    def is_zero(self):
        return self.indices.size == 0

    def __len__(self):
        return int(self.indices.size)

    def __add__(self, other):
        return SparseVector(
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.values, other.values]),
        )

    def __sub__(self, other):
        return SparseVector(
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.values, -other.values]),
        )

    def __neg__(self):
        return SparseVector(self.indices, -self.values, _canonical=True)

    def __mul__(self, scalar):
        scalar = float(scalar)
        if scalar == 0.0:
            return SparseVector()
        return SparseVector(self.indices, self.values * scalar)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        items = ", ".join(f"{i}: {v:g}" for i, v in zip(self.indices[:8], self.values[:8]))
        more = ", ..." if len(self) > 8 else ""
        return f"SparseVector({{{items}{more}}})"


def _canonicalize(idx, val):
    if idx.size == 0:
        return idx.copy(), val.copy()
    if idx.min() < 0:
        raise StructureError("feature ids must be non-negative")
    uniq, inverse = np.unique(idx, return_inverse=True)
    # bincount accumulates in input order, which keeps sums reproducible
    summed = np.bincount(inverse, weights=val, minlength=uniq.size)
    keep = summed != 0.0
    return uniq[keep], summed[keep]


@dataclass(frozen=True)
class SequenceExample:
    """Observed sequence x and hidden labels y, both 1-based and of equal length."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.int64).ravel()
        y = np.array(self.y, dtype=np.int64).ravel()
        if x.size == 0 or x.size != y.size:
            raise StructureError(f"len(x)={x.size} and len(y)={y.size} must match and be > 0")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def length(self):
        return int(self.x.size)

    def validate(self, index):
        index.check_observations(self.x)
        index.check_labels(self.y)
        return self

    def __eq__(self, other):
        if not isinstance(other, SequenceExample):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes()))


class FeatureIndex:
    """
    Injective encoding of template instantiations to feature ids.

    Template blocks are laid out consecutively in the order of
    ``TEMPLATE_NAMES``; within a block the id is a mixed-radix number over
    the template's zero-based symbol values (x - 1, y - 1, y_prev).
    """

    def __init__(self, n_obs, n_labels):
        if n_obs < 1 or n_labels < 1:
            raise ValueError("alphabet sizes must be positive")
        self.n_obs = int(n_obs)
        self.n_labels = int(n_labels)
        cx, cy, cp = self.n_obs, self.n_labels, self.n_labels + 1
        self.block_sizes = (cx, cy, cp, cx * cy, cy * cp, cx * cy * cp)
        self.offsets = np.concatenate([[0], np.cumsum(self.block_sizes)[:-1]]).astype(np.int64)
        self.offsets.setflags(write=False)
        self.size = int(sum(self.block_sizes))

    def __repr__(self):
        return f"FeatureIndex(n_obs={self.n_obs}, n_labels={self.n_labels}, size={self.size})"

    def __eq__(self, other):
        return (
            isinstance(other, FeatureIndex)
            and self.n_obs == other.n_obs
            and self.n_labels == other.n_labels
        )

    def __hash__(self):
        return hash((self.n_obs, self.n_labels))

    def check_observations(self, x):
        x = np.asarray(x)
        if x.size and (x.min() < 1 or x.max() > self.n_obs):
            raise StructureError(f"observations must lie in 1..{self.n_obs}")

    def check_labels(self, y):
        y = np.asarray(y)
        if y.size and (y.min() < 1 or y.max() > self.n_labels):
            raise StructureError(f"labels must lie in 1..{self.n_labels}")

    def encode(self, template, values):
        """Feature id of ``template`` (name or position) instantiated at ``values``.

        Values use the public symbol conventions: observations 1..C_x,
        labels 1..C_y, and previous labels 0..C_y with 0 the boundary.
        """
        t = TEMPLATE_NAMES.index(template) if isinstance(template, str) else int(template)
        cy, cp = self.n_labels, self.n_labels + 1
        v = tuple(int(a) for a in values)
        if t == 0:
            (x,) = v
            self._range(x, 1, self.n_obs)
            local = x - 1
        elif t == 1:
            (y,) = v
            self._range(y, 1, cy)
            local = y - 1
        elif t == 2:
            (p,) = v
            self._range(p, 0, cy)
            local = p
        elif t == 3:
            x, y = v
            self._range(x, 1, self.n_obs)
            self._range(y, 1, cy)
            local = (x - 1) * cy + (y - 1)
        elif t == 4:
            y, p = v
            self._range(y, 1, cy)
            self._range(p, 0, cy)
            local = (y - 1) * cp + p
        elif t == 5:
            x, y, p = v
            self._range(x, 1, self.n_obs)
            self._range(y, 1, cy)
            self._range(p, 0, cy)
            local = ((x - 1) * cy + (y - 1)) * cp + p
        else:
            raise StructureError(f"unknown template {template!r}")
        return int(self.offsets[t]) + local

    def decode(self, feature_id):
        """Inverse of :meth:`encode`: returns ``(template_name, values)``."""
        f = int(feature_id)
        if not 0 <= f < self.size:
            raise StructureError(f"feature id {f} outside 0..{self.size - 1}")
        t = int(np.searchsorted(self.offsets, f, side="right")) - 1
        local = f - int(self.offsets[t])
        cy, cp = self.n_labels, self.n_labels + 1
        if t == 0:
            vals = (local + 1,)
        elif t == 1:
            vals = (local + 1,)
        elif t == 2:
            vals = (local,)
        elif t == 3:
            vals = (local // cy + 1, local % cy + 1)
        elif t == 4:
            vals = (local // cp + 1, local % cp)
        else:
            xy, p = divmod(local, cp)
            vals = (xy // cy + 1, xy % cy + 1, p)
        return TEMPLATE_NAMES[t], vals

    @staticmethod
    def _range(v, lo, hi):
        if not lo <= v <= hi:
            raise StructureError(f"symbol {v} outside {lo}..{hi}")

    def position_ids(self, x, y):
        """Feature ids firing at each position, shape ``(L, 6)``.

        ``x`` and ``y`` may carry a leading batch axis, giving ``(..., L, 6)``.
        """
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if x.shape[-1] != y.shape[-1]:
            raise StructureError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
        x, y = np.broadcast_arrays(x, y)
        prev = np.zeros_like(y)
        prev[..., 1:] = y[..., :-1]
        cy, cp = self.n_labels, self.n_labels + 1
        xo, yo = x - 1, y - 1
        off = self.offsets
        return np.stack(
            [
                off[0] + xo,
                off[1] + yo,
                off[2] + prev,
                off[3] + xo * cy + yo,
                off[4] + yo * cp + prev,
                off[5] + (xo * cy + yo) * cp + prev,
            ],
            axis=-1,
        )


def phi(x, y, index):
    """Feature counts of labeling ``y`` for observations ``x``."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise StructureError(f"x and y must be equal-length 1-D sequences, got {x.shape} and {y.shape}")
    index.check_observations(x)
    index.check_labels(y)
    ids = index.position_ids(x, y).ravel()
    return SparseVector(ids, np.ones(ids.size))


def delta_phi(x, y_gold, z, index):
    """phi(x, y_gold) - phi(x, z)."""
    y_gold = np.asarray(y_gold, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    if y_gold.shape != z.shape:
        raise StructureError(f"labelings differ in length: {y_gold.shape} vs {z.shape}")
    return phi(x, y_gold, index) - phi(x, z, index)


def phi_matrix(x, labelings, index, dtype=np.float64):
    """Dense feature counts for many labelings of the same ``x``, shape ``(N, d)``."""
    labelings = np.atleast_2d(np.asarray(labelings, dtype=np.int64))
    x = np.asarray(x, dtype=np.int64)
    if labelings.shape[1] != x.size:
        raise StructureError("labelings and x differ in length")
    ids = index.position_ids(x[None, :], labelings).reshape(labelings.shape[0], -1)
    out = np.zeros((labelings.shape[0], index.size), dtype=dtype)
    rows = np.repeat(np.arange(labelings.shape[0]), ids.shape[1])
    np.add.at(out, (rows, ids.ravel()), 1.0)
    return out
