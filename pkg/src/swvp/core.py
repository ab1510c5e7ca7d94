"""
Mixed assignments and violation bookkeeping.

For gold labels y, a prediction y* != y and an index set J, the mixed
assignment m^J takes y* on J and y elsewhere. A substructure set JJ_x is a
list of such index sets; each J whose mixed assignment differs from y is
classified as violating (w . dphi(x, y, m^J) <= 0) or non-violating.
Index sets are 0-based throughout the code.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .features import SparseVector, StructureError, delta_phi

CONDITION1_TOL = 1e-9
CONDITION2_TOL = 1e-12


class JJPolicy(str, Enum):
    """How the substructure set is built for a sequence of length L."""

    FULL = "full"  # {[L]}: the whole prediction, i.e. the perceptron update
    SINGLE = "single"  # {{1}, ..., {L}}: single-difference assignments

    def substructures(self, length):
        return substructures(self, length)


def substructures(policy, length):
    """Materialize the index sets of ``policy`` for a sequence of ``length``."""
    policy = JJPolicy(policy)
    if length < 1:
        raise ValueError("length must be positive")
    if policy is JJPolicy.FULL:
        return [tuple(range(length))]
    return [(j,) for j in range(length)]


def mixed_assignment(y_star, y_gold, J):
    """Labeling equal to ``y_star`` on positions ``J`` and to ``y_gold`` elsewhere."""
    y_star = np.asarray(y_star, dtype=np.int64)
    y_gold = np.asarray(y_gold, dtype=np.int64)
    if y_star.shape != y_gold.shape:
        raise StructureError("y_star and y_gold differ in length")
    J = np.asarray(tuple(J), dtype=np.int64)
    if J.size == 0:
        raise StructureError("substructure must be non-empty")
    if J.min() < 0 or J.max() >= y_gold.size:
        raise StructureError(f"substructure {tuple(J)} outside 0..{y_gold.size - 1}")
    out = y_gold.copy()
    out[J] = y_star[J]
    return out


@dataclass(frozen=True)
class MixedAssignment:
    J: tuple
    label: np.ndarray
    margin: float
    delta: object = field(repr=False)  # SparseVector dphi(x, y, label)

    @property
    def violating(self):
        return self.margin <= 0.0


@dataclass(frozen=True)
class ViolationPartition:
    """Mixed assignments that differ from gold, in substructure order."""

    members: tuple

    @property
    def violating(self):
        return [m for m in self.members if m.violating]

    @property
    def non_violating(self):
        return [m for m in self.members if not m.violating]

    @property
    def margins(self):
        return np.array([m.margin for m in self.members], dtype=np.float64)

    @property
    def violating_mask(self):
        return np.array([m.violating for m in self.members], dtype=bool)

    def __len__(self):
        return len(self.members)


def partition_violations(x, y_gold, y_star, jj, w, index):
    """Split the mixed assignments of ``jj`` into violating and non-violating.

    ``w`` is a dense weight vector. Assignments equal to ``y_gold`` are dropped.
    """
    y_gold = np.asarray(y_gold, dtype=np.int64)
    y_star = np.asarray(y_star, dtype=np.int64)
    if np.array_equal(y_gold, y_star):
        raise StructureError("partition is undefined when the prediction equals gold")
    members = []
    for J in jj:
        m = mixed_assignment(y_star, y_gold, J)
        if np.array_equal(m, y_gold):
            continue
        d = delta_phi(x, y_gold, m, index)
        members.append(MixedAssignment(tuple(int(j) for j in J), m, d.dot(w), d))
    return ViolationPartition(tuple(members))


def weighted_update(partition, gamma):
    """sum_J gamma_J dphi_J over members with positive weight, as a SparseVector."""
    pairs = [(m.delta, g) for m, g in zip(partition.members, gamma) if g > 0.0]
    return SparseVector.linear_combination([p[0] for p in pairs], [p[1] for p in pairs])


def check_gamma_conditions(gamma, partition, w, x=None, y_gold=None, index=None):
    """Evaluate both weight selection conditions for ``gamma`` over ``partition``.

    Condition 1: weights are non-negative and sum to one. Condition 2:
    ``w . sum_J gamma_J dphi_J <= 0``. The weighted margin is recomputed as a
    direct dot product with the combined update; when ``x``, ``y_gold`` and
    ``index`` are all given each dphi is also rebuilt from the labels rather
    than taken from the partition.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (len(partition),):
        raise StructureError(
            f"gamma has {gamma.size} entries for {len(partition)} mixed assignments"
        )
    cond1 = bool(np.all(gamma >= 0.0) and abs(gamma.sum() - 1.0) <= CONDITION1_TOL)
    if x is not None and y_gold is not None and index is not None:
        deltas = [delta_phi(x, y_gold, m.label, index) for m in partition.members]
        update = SparseVector.linear_combination(deltas, gamma)
    else:
        update = weighted_update(partition, gamma)
    weighted_margin = update.dot(w)
    return {
        "condition1": cond1,
        "condition2": bool(weighted_margin <= CONDITION2_TOL),
        "weighted_margin": weighted_margin,
    }
