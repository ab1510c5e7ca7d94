"""
Online training loops.

``train_csp`` is the plain structured perceptron. ``train_swvp`` replaces its
update with a gamma-weighted sum over mixed assignments and falls back to a
perceptron update whenever the weighting scheme has an empty support.

Two interchangeable engines compute the SWVP update: the compiled kernel
``_kernels.swvp_step_nb`` and the modular reference built from
``core.partition_violations`` and ``gamma.set_gamma``. The reference runs
when numba is disabled or when ``debug`` is on, since the debug checks need
the explicit partition.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .core import (
    CONDITION1_TOL,
    CONDITION2_TOL,
    JJPolicy,
    check_gamma_conditions,
    partition_violations,
    substructures,
    weighted_update,
)
from .features import SparseVector, StructureError, delta_phi
from .gamma import GammaScheme, NoGammaAvailable, entropy, set_gamma

logger = logging.getLogger(__name__)

JENSEN_RTOL = 1e-9


class InvariantViolation(AssertionError):
    """A debug-mode check on an update failed."""


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    scheme: GammaScheme = field(default_factory=GammaScheme.csp)
    jj_policy: JJPolicy = JJPolicy.FULL
    averaging: bool = False
    seed: int = 0
    shuffle: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        object.__setattr__(self, "jj_policy", JJPolicy(self.jj_policy))
        if self.scheme.is_csp:
            object.__setattr__(self, "jj_policy", JJPolicy.FULL)


UPDATE_LOG_DTYPE = np.dtype(
    [
        ("example", np.int64),
        ("n_violating", np.int64),
        ("n_nonviolating", np.int64),
        ("gamma_entropy", np.float64),
        ("backed_off", np.bool_),
    ]
)


@dataclass(frozen=True)
class TrainResult:
    w: SparseVector
    w_avg: SparseVector | None
    updates: int
    mistakes: int
    epochs_run: int
    converged: bool
    update_log: np.ndarray = field(repr=False)
    epoch_updates: tuple = ()
    checks: dict | None = field(default=None, repr=False)

    @property
    def backoffs(self):
        return int(self.update_log["backed_off"].sum())

    def weights(self, averaged=None):
        """Weights to decode with: averaged ones when available and requested."""
        if averaged is None:
            averaged = self.w_avg is not None
        if averaged:
            if self.w_avg is None:
                raise ValueError("training ran without averaging")
            return self.w_avg
        return self.w

    def summary(self):
        lines = [
            f"updates={self.updates}",
            f"mistakes={self.mistakes}",
            f"epochs_run={self.epochs_run}",
            f"converged={self.converged}",
            f"backoffs={self.backoffs}",
            f"nnz_w={len(self.w)}",
            f"norm_w={self.w.norm():.6g}",
        ]
        if self.w_avg is not None:
            lines.append(f"norm_w_avg={self.w_avg.norm():.6g}")
        return "\n".join(lines)


class WeightAverager:
    """Running mean of the weight vector after every example visit.

    Uses the lazy accumulator: an update applied during 0-based visit ``v``
    is added to ``acc`` scaled by ``v``, so that after ``n`` visits the mean
    is ``w - acc / n`` without touching untouched coordinates.
    """

    def __init__(self, size):
        self.w = np.zeros(size)
        self.acc = np.zeros(size)
        self.visits = 0

    def update(self, idx, vals):
        self.w[idx] += vals
        if self.visits:
            self.acc[idx] += self.visits * vals

    def tick(self):
        self.visits += 1

    def average(self):
        if self.visits == 0:
            raise ValueError("no visits recorded")
        return self.w - self.acc / self.visits


def average_weights(events, n_visits, size):
    """Mean of the post-visit weight vectors of a run starting from zero.

    ``events`` is an iterable of ``(visit, SparseVector)`` pairs giving the
    update applied during each 0-based visit.
    """
    avg = WeightAverager(size)
    pending = sorted(events, key=lambda e: e[0])
    k = 0
    for v in range(n_visits):
        while k < len(pending) and pending[k][0] == v:
            upd = pending[k][1]
            avg.update(upd.indices, upd.values)
            k += 1
        avg.tick()
    if k != len(pending):
        raise ValueError("event visit index beyond n_visits")
    return SparseVector.from_dense(avg.average())


def _check_data(data, index):
    if not data:
        raise ValueError("training data is empty")
    for ex in data:
        ex.validate(index)


def _csp_update(w, ex, ystar, index):
    return _kernels.delta_phi_sparse(ex.x, ex.y, ystar, index.offsets, index.n_labels)


def _reference_step(w, ex, ystar, index, config, checks):
    """Modular SWVP update: returns ``(ids, vals, n_v, n_nv, entropy, backed_off)``."""
    jj = substructures(config.jj_policy, ex.length)
    part = partition_violations(ex.x, ex.y, ystar, jj, w, index)
    n_v = len(part.violating)
    n_nv = len(part) - n_v
    try:
        gamma = set_gamma(config.scheme, part)
    except NoGammaAvailable:
        d = delta_phi(ex.x, ex.y, ystar, index)
        if checks is not None:
            _check_backoff(w, ex, ystar, index, checks)
        return d.indices, d.values, n_v, n_nv, 0.0, True
    upd = weighted_update(part, gamma)
    if checks is not None:
        _check_update(w, ex, ystar, part, gamma, upd, index, config, checks)
    return upd.indices, upd.values, n_v, n_nv, entropy(gamma), False


def _check_prediction(w, ex, ystar, index, checks):
    """The argmax output must itself be a violation."""
    d = delta_phi(ex.x, ex.y, ystar, index)
    margin = d.dot(w)
    checks["max_prediction_margin"] = max(checks["max_prediction_margin"], margin)
    scale = float(np.dot(np.abs(w[d.indices]), np.abs(d.values))) if len(d) else 0.0
    if margin > 1e-9 * max(scale, 1.0):
        raise InvariantViolation(f"argmax output is not a violation: margin {margin:.3e}")
    return d


def _check_backoff(w, ex, ystar, index, checks):
    checks["backoffs"] += 1
    _check_single_term(w, ex, ystar, index, checks)


def _check_single_term(w, ex, ystar, index, checks):
    d = _check_prediction(w, ex, ystar, index, checks)
    checks["updates_checked"] += 1
    checks["jensen_checked"] += 1
    if len(d):
        checks["max_jensen_ratio"] = max(checks["max_jensen_ratio"], d.sq_norm() / d.sq_norm())


def _check_update(w, ex, ystar, part, gamma, upd, index, config, checks):
    res = check_gamma_conditions(gamma, part, w, ex.x, ex.y, index)
    checks["updates_checked"] += 1
    if not res["condition1"]:
        checks["condition1_failures"] += 1
        raise InvariantViolation(f"condition 1 failed: gamma={gamma}")
    checks["max_weighted_margin"] = max(checks["max_weighted_margin"], res["weighted_margin"])
    if not res["condition2"]:
        checks["condition2_failures"] += 1
        if config.scheme.mode.value == "A" or config.scheme.enforce_condition2:
            raise InvariantViolation(
                f"condition 2 failed: weighted margin {res['weighted_margin']:.3e}"
            )
    # Jensen step of the convergence argument
    lhs = upd.sq_norm()
    rhs = 0.0
    for m, g in zip(part.members, gamma):
        if g > 0.0:
            rhs += g * m.delta.sq_norm()
    checks["jensen_checked"] += 1
    if rhs > 0:
        checks["max_jensen_ratio"] = max(checks["max_jensen_ratio"], lhs / rhs)
    if lhs > rhs * (1.0 + JENSEN_RTOL):
        raise InvariantViolation(f"Jensen step failed: {lhs} > {rhs}")
    _check_prediction(w, ex, ystar, index, checks)


def _new_checks():
    return {
        "updates_checked": 0,
        "backoffs": 0,
        "condition1_failures": 0,
        "condition2_failures": 0,
        "max_weighted_margin": -math.inf,
        "jensen_checked": 0,
        "max_jensen_ratio": 0.0,
        "max_prediction_margin": -math.inf,
        "condition1_tol": CONDITION1_TOL,
        "condition2_tol": CONDITION2_TOL,
    }


def _train(data, index, config, swvp):
    _check_data(data, index)
    n = len(data)
    avg = WeightAverager(index.size)
    w = avg.w
    rng = np.random.default_rng(config.seed)
    checks = _new_checks() if config.debug else None
    off, cy = index.offsets, index.n_labels
    use_kernel = swvp and _kernels.using_numba() and not config.debug
    if swvp:
        family, mode = config.scheme.kernel_codes()
        policy = (
            _kernels.POLICY_FULL if config.jj_policy is JJPolicy.FULL else _kernels.POLICY_SINGLE
        )
        beta = config.scheme.beta
        enforce = bool(config.scheme.enforce_condition2)

    log_cols = ([], [], [], [], [])
    updates = 0
    mistakes = 0
    epoch_updates = []
    converged = False
    epochs_run = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(n) if config.shuffle else range(n)
        epoch_mistakes = 0
        epoch_upd = 0
        for i in order:
            ex = data[i]
            ystar = _kernels.decode(w, ex.x, off, cy)
            if not np.array_equal(ystar, ex.y):
                epoch_mistakes += 1
                if not swvp:
                    ids, vals = _csp_update(w, ex, ystar, index)
                    n_v, n_nv, ent, backed = 1, 0, 0.0, False
                    if checks is not None:
                        _check_single_term(w, ex, ystar, index, checks)
                elif use_kernel:
                    ids, vals, n_v, n_nv, ent, backed = _kernels.swvp_step_nb(
                        w, ex.x, ex.y, ystar, off, cy, policy, family, mode, beta, enforce
                    )
                else:
                    ids, vals, n_v, n_nv, ent, backed = _reference_step(
                        w, ex, ystar, index, config, checks
                    )
                if len(ids):
                    avg.update(ids, vals)
                    epoch_upd += 1
                    for col, v in zip(log_cols, (i, n_v, n_nv, ent, backed)):
                        col.append(v)
            avg.tick()
        epochs_run = epoch + 1
        updates += epoch_upd
        mistakes += epoch_mistakes
        epoch_updates.append(epoch_upd)
        logger.debug("epoch %d: %d mistakes, %d updates", epochs_run, epoch_mistakes, epoch_upd)
        if epoch_mistakes == 0:
            converged = True
            break

    log = np.zeros(len(log_cols[0]), dtype=UPDATE_LOG_DTYPE)
    for name, col in zip(UPDATE_LOG_DTYPE.names, log_cols):
        log[name] = col
    return TrainResult(
        w=SparseVector.from_dense(w),
        w_avg=SparseVector.from_dense(avg.average()) if config.averaging else None,
        updates=updates,
        mistakes=mistakes,
        epochs_run=epochs_run,
        converged=converged,
        update_log=log,
        epoch_updates=tuple(epoch_updates),
        checks=checks,
    )


def train_csp(data, index, config=None):
    """Structured perceptron: ``w += dphi(x, y, y*)`` on every mistake."""
    config = config or TrainConfig()
    if not config.scheme.is_csp:
        config = replace(config, scheme=GammaScheme.csp())
    return _train(data, index, config, swvp=False)


def train_swvp(data, index, config):
    """Weighted-violations perceptron with perceptron back-off on empty support."""
    if config.scheme.is_csp and config.jj_policy is not JJPolicy.FULL:
        raise StructureError("the CSP scheme requires the full substructure set")
    return _train(data, index, config, swvp=True)
