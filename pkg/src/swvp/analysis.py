"""
Separability, radius and mistake-bound quantities computed by enumeration.

For a unit vector u and each training pair (x, y), every rival labeling
z != y is scored, giving the margin u . dphi(x, y, z) and the radius
||dphi(x, y, z)||. The same is done for the mixed assignments m^J(z, y)
of a substructure policy. From these come the update bounds R^2 / delta^2
(perceptron) and (R^JJ)^2 / (delta^JJ)^2 (mixed assignments), and the
first-pass mistake bounds with hinge slack for data that u does not separate.

All quantities are exact up to floating point; bound comparisons allow a
relative slack of ``BOUND_RTOL`` on the right-hand side only.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import JJPolicy, substructures
from .features import SparseVector, phi_matrix
from .gamma import GammaScheme
from .inference import DEFAULT_ENUMERATION_CAP, LabelSpace, as_dense
from .trainers import TrainConfig, train_csp, train_swvp

BOUND_RTOL = 1e-9
_CHUNK = 8192


@dataclass(frozen=True)
class ExampleStats:
    """Per-example extremes over rivals (full labelings) and mixed assignments."""

    margin: float  # r^i = min_z u . dphi(x, y, z)
    radius: float  # max_z ||dphi(x, y, z)||
    margin_jj: float  # r^{i,JJ}
    radius_jj: float


def _all_margins(ex, labelings, u, index):
    """u . dphi(x, y, z) and ||dphi(x, y, z)|| for every row z."""
    phi_y = phi_matrix(ex.x, ex.y[None, :], index)[0]
    n = labelings.shape[0]
    margins = np.empty(n)
    radii = np.empty(n)
    for at in range(0, n, _CHUNK):
        delta = phi_y[None, :] - phi_matrix(ex.x, labelings[at : at + _CHUNK], index)
        margins[at : at + _CHUNK] = delta @ u
        radii[at : at + _CHUNK] = np.sqrt((delta * delta).sum(axis=1))
    return margins, radii


def lexicographic_rank(labelings, n_labels):
    """Row position of each labeling within ``LabelSpace(n_labels, L).array()``."""
    labelings = np.atleast_2d(labelings)
    L = labelings.shape[1]
    radix = n_labels ** np.arange(L - 1, -1, -1, dtype=np.int64)
    return (labelings - 1) @ radix


def mixed_assignment_set(ex, labelings, policy):
    """Distinct m^J(z, y) over rows z and J in the policy's substructures, excluding y."""
    y = ex.y
    rows = []
    for J in substructures(policy, ex.length):
        mask = np.zeros(ex.length, dtype=bool)
        mask[list(J)] = True
        rows.append(np.where(mask[None, :], labelings, y[None, :]))
    mas = np.unique(np.concatenate(rows), axis=0)
    return mas[~np.all(mas == y[None, :], axis=1)]


def example_stats(ex, u, policy, index, cap=DEFAULT_ENUMERATION_CAP):
    """Extremes over rivals and mixed assignments.

    Every labeling is scored once; mixed assignments are looked up among the
    same scores, so the inclusion of the MA set in Y(x) holds bit for bit.
    """
    Z = LabelSpace(index.n_labels, ex.length).array(cap)
    gold = int(lexicographic_rank(ex.y, index.n_labels)[0])
    rival = np.ones(Z.shape[0], dtype=bool)
    rival[gold] = False
    if not rival.any():
        # a single label: no rivals, every bound is vacuous
        return ExampleStats(math.inf, 0.0, math.inf, 0.0)
    margins, radii = _all_margins(ex, Z, u, index)
    r, R = float(margins[rival].min()), float(radii[rival].max())
    if JJPolicy(policy) is JJPolicy.FULL:
        return ExampleStats(r, R, r, R)
    ma = lexicographic_rank(mixed_assignment_set(ex, Z[rival], policy), index.n_labels)
    return ExampleStats(r, R, float(margins[ma].min()), float(radii[ma].max()))


def _unit(u, index):
    u = as_dense(u, index).copy()
    n = np.linalg.norm(u)
    if n == 0.0:
        raise ValueError("witness vector u must be non-zero")
    return u / n


def _ratio(num, den):
    return num * num / (den * den) if den > 0 else math.inf


@dataclass(frozen=True)
class SeparabilityReport:
    u: SparseVector
    policy: JJPolicy
    delta: float
    R: float
    delta_JJ: float
    R_JJ: float
    separable: bool
    csp_bound: float
    swvp_bound: float
    per_example: tuple = field(default=(), repr=False)

    def to_lines(self):
        return "\n".join(
            [
                f"policy={self.policy.value}",
                f"separable={self.separable}",
                f"delta={self.delta!r}",
                f"R={self.R!r}",
                f"delta_JJ={self.delta_JJ!r}",
                f"R_JJ={self.R_JJ!r}",
                f"csp_bound={self.csp_bound!r}",
                f"swvp_bound={self.swvp_bound!r}",
                f"u_norm={self.u.norm()!r}",
            ]
        )

    def to_record(self):
        return {
            "type": "separability",
            "policy": self.policy.value,
            "separable": self.separable,
            "delta": self.delta,
            "R": self.R,
            "delta_JJ": self.delta_JJ,
            "R_JJ": self.R_JJ,
            "csp_bound": self.csp_bound,
            "swvp_bound": self.swvp_bound,
        }


def compute_margins(data, u, policy, index, cap=DEFAULT_ENUMERATION_CAP):
    """Margins and radii of ``data`` under unit(u), for full labelings and for ``policy``."""
    policy = JJPolicy(policy)
    unit = _unit(u, index)
    stats = tuple(example_stats(ex, unit, policy, index, cap) for ex in data)
    delta = min(s.margin for s in stats)
    R = max(s.radius for s in stats)
    delta_jj = min(s.margin_jj for s in stats)
    R_jj = max(s.radius_jj for s in stats)
    separable = delta > 0
    return SeparabilityReport(
        u=SparseVector.from_dense(unit),
        policy=policy,
        delta=delta,
        R=R,
        delta_JJ=delta_jj,
        R_JJ=R_jj,
        separable=separable,
        csp_bound=_ratio(R, delta) if separable else math.inf,
        swvp_bound=_ratio(R_jj, delta_jj) if delta_jj > 0 else math.inf,
        per_example=stats,
    )


def find_separator(data, index, max_epochs=1000, cap=DEFAULT_ENUMERATION_CAP):
    """A unit vector that strictly separates ``data``, or None if none was found.

    Runs the perceptron first; if its converged weights leave a rival tied
    with gold (argmax ties are broken in favour of gold's labeling order), it
    continues with perceptron updates against the lowest-margin rival found by
    enumeration until every rival has positive margin.
    """
    res = train_csp(data, index, TrainConfig(max_epochs=max_epochs))
    if not res.converged:
        return None
    w = res.w.to_dense(index.size)
    if np.any(w):
        rep = compute_margins(data, w, JJPolicy.FULL, index, cap)
        if rep.separable:
            return rep.u
    deltas = []
    for ex in data:
        Z = LabelSpace(index.n_labels, ex.length).array(cap)
        Z = Z[~np.all(Z == ex.y[None, :], axis=1)]
        deltas.append(phi_matrix(ex.x, ex.y[None, :], index)[0][None, :] - phi_matrix(ex.x, Z, index))
    for _ in range(max_epochs):
        changed = False
        for D in deltas:
            if D.shape[0] == 0:
                continue
            m = D @ w
            k = int(np.argmin(m))
            if m[k] <= 0.0:
                w = w + D[k]
                changed = True
        if not changed:
            return SparseVector.from_dense(w / np.linalg.norm(w))
    return None


def check_theorem1(result, report, csp=False):
    """Update count of a converged run against the enumeration bound(s)."""
    if not report.separable:
        raise ValueError("bound check needs data certified separable")
    if not result.converged:
        raise ValueError("bound check needs a converged run")
    ok = result.updates <= report.swvp_bound * (1.0 + BOUND_RTOL)
    if csp:
        ok = ok and result.updates <= report.csp_bound * (1.0 + BOUND_RTOL)
    return bool(ok)


@dataclass(frozen=True)
class MistakeBoundReport:
    delta: float
    r: np.ndarray
    r_JJ: np.ndarray
    epsilon: np.ndarray
    D_u_delta: float
    r_diff: float
    R: float
    R_JJ: float
    csp_rhs: float
    swvp_rhs: float
    first_pass_mistakes_csp: int
    first_pass_mistakes_swvp: int
    swvp_scheme: str = "A-WM"

    @property
    def csp_holds(self):
        return self.first_pass_mistakes_csp <= self.csp_rhs * (1.0 + BOUND_RTOL)

    @property
    def swvp_holds(self):
        return self.first_pass_mistakes_swvp <= self.swvp_rhs * (1.0 + BOUND_RTOL)

    def to_lines(self):
        return "\n".join(
            [
                f"delta={self.delta!r}",
                f"D_u_delta={self.D_u_delta!r}",
                f"r_diff={self.r_diff!r}",
                f"R={self.R!r}",
                f"R_JJ={self.R_JJ!r}",
                f"csp_rhs={self.csp_rhs!r}",
                f"swvp_rhs={self.swvp_rhs!r}",
                f"first_pass_mistakes_csp={self.first_pass_mistakes_csp}",
                f"first_pass_mistakes_swvp={self.first_pass_mistakes_swvp}",
                f"swvp_scheme={self.swvp_scheme}",
                f"csp_holds={self.csp_holds}",
                f"swvp_holds={self.swvp_holds}",
                "note=bounds are checked at this witness (u, delta) only; the theorem minimizes over all pairs",
            ]
        )

    def to_record(self):
        return {
            "type": "mistake_bound",
            "delta": self.delta,
            "D_u_delta": self.D_u_delta,
            "r_diff": self.r_diff,
            "R": self.R,
            "R_JJ": self.R_JJ,
            "csp_rhs": self.csp_rhs,
            "swvp_rhs": self.swvp_rhs,
            "first_pass_mistakes_csp": self.first_pass_mistakes_csp,
            "first_pass_mistakes_swvp": self.first_pass_mistakes_swvp,
            "swvp_scheme": self.swvp_scheme,
        }


def compute_mistake_bound(
    data, u, delta, policy, index, scheme=None, cap=DEFAULT_ENUMERATION_CAP, stats=None
):
    """Slack-adjusted first-pass mistake bounds at the witness ``(u, delta)``.

    ``stats`` may pass precomputed :func:`example_stats` for the same u and policy.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    policy = JJPolicy(policy)
    scheme = scheme or GammaScheme.parse("A-WM")
    if stats is None:
        unit = _unit(u, index)
        stats = [example_stats(ex, unit, policy, index, cap) for ex in data]
    r = np.array([s.margin for s in stats])
    r_jj = np.array([s.margin_jj for s in stats])
    eps = np.maximum(0.0, delta - r)
    D = float(np.sqrt(np.sum(eps * eps)))
    r_diff = float(np.min(r_jj - r))
    R = max(s.radius for s in stats)
    R_jj = max(s.radius_jj for s in stats)
    csp_rhs = (R + D) ** 2 / delta**2
    swvp_rhs = (R_jj + D) ** 2 / (delta + r_diff) ** 2

    csp_run = train_csp(data, index, TrainConfig(max_epochs=1))
    swvp_run = train_swvp(data, index, TrainConfig(max_epochs=1, scheme=scheme, jj_policy=policy))
    return MistakeBoundReport(
        delta=float(delta),
        r=r,
        r_JJ=r_jj,
        epsilon=eps,
        D_u_delta=D,
        r_diff=r_diff,
        R=R,
        R_JJ=R_jj,
        csp_rhs=csp_rhs,
        swvp_rhs=swvp_rhs,
        first_pass_mistakes_csp=csp_run.mistakes,
        first_pass_mistakes_swvp=swvp_run.mistakes,
        swvp_scheme=scheme.token,
    )
