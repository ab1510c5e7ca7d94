"""
Weighting schemes for mixed-assignment updates.

Two families are supported, each aggressive (support restricted to violating
assignments) or balanced (support over all assignments that differ from gold):

* WM, weighted margin:       raw_J = |margin_J| ** beta
* WMR, weighted margin rank: raw_J = ((|S| - r_J) / |S|) ** beta, with r_J the
  0-based rank of |margin_J| in descending order within the support S.

Raw weights are normalized to sum to one over the support. A ``CSP`` family
gives every supported assignment equal weight; with the full substructure set
that is a weight of one on the prediction itself.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels


class NoGammaAvailable(Exception):
    """The support set is empty, so no admissible weights exist."""


class Family(str, Enum):
    CSP = "CSP"
    WM = "WM"
    WMR = "WMR"


class Mode(str, Enum):
    AGGRESSIVE = "A"
    BALANCED = "B"


MODEL_TOKENS = ("CSP", "A-WM", "B-WM", "A-WMR", "B-WMR")


@dataclass(frozen=True)
class GammaScheme:
    family: Family
    mode: Mode = Mode.AGGRESSIVE
    beta: float = 1.0
    enforce_condition2: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "beta", float(self.beta))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @classmethod
    def csp(cls):
        return cls(Family.CSP, Mode.AGGRESSIVE, 1.0)

    @classmethod
    def parse(cls, token, beta=1.0, enforce_condition2=False):
        """Build a scheme from a model token such as ``"B-WMR"``; ``beta=<x>`` suffixes are accepted."""
        token = token.strip()
        if "," in token or " " in token:
            head, *rest = token.replace(",", " ").split()
            for extra in rest:
                key, _, val = extra.partition("=")
                if key != "beta":
                    raise ValueError(f"unknown scheme option {extra!r}")
                beta = float(val)
            token = head
        if token.upper() == "CSP":
            return cls.csp()
        mode, _, fam = token.upper().partition("-")
        if token.upper() not in MODEL_TOKENS:
            raise ValueError(f"unknown model token {token!r}; expected one of {MODEL_TOKENS}")
        return cls(Family(fam), Mode(mode), beta, enforce_condition2)

    @property
    def is_csp(self):
        return self.family is Family.CSP

    @property
    def token(self):
        if self.is_csp:
            return "CSP"
        return f"{self.mode.value}-{self.family.value}"

    def kernel_codes(self):
        family = {
            Family.CSP: _kernels.FAMILY_CSP,
            Family.WM: _kernels.FAMILY_WM,
            Family.WMR: _kernels.FAMILY_WMR,
        }[self.family]
        mode = _kernels.MODE_BALANCED if self.mode is Mode.BALANCED else _kernels.MODE_AGGRESSIVE
        return family, mode


def support_mask(scheme, partition):
    if scheme.is_csp or scheme.mode is Mode.BALANCED:
        return np.ones(len(partition), dtype=bool)
    return partition.violating_mask


def margin_ranks(abs_margins):
    """Descending rank of each value, ties broken by position (earlier ranks first)."""
    a = np.asarray(abs_margins, dtype=np.float64)
    order = sorted(range(a.size), key=lambda k: (-a[k], k))
    ranks = np.empty(a.size, dtype=np.int64)
    ranks[order] = np.arange(a.size)
    return ranks


def raw_weights(scheme, margins):
    """Unnormalized weights for the supported margins, in order."""
    margins = np.asarray(margins, dtype=np.float64)
    if scheme.is_csp:
        return np.ones(margins.size)
    a = np.abs(margins)
    beta = scheme.beta
    # scalar libm pow, not numpy's vectorized power: keeps results bitwise equal to the kernel
    if scheme.family is Family.WM:
        return np.array([math.pow(v, beta) for v in a])
    n = a.size
    return np.array([math.pow((n - r) / n, beta) for r in margin_ranks(a)])


def _normalize(raw, mask):
    gamma = np.zeros(raw.size)
    sel = np.flatnonzero(mask)
    total = 0.0
    for k in sel:  # sequential on purpose: matches the compiled kernel bit for bit
        total += raw[k]
    if total > 0.0:
        gamma[sel] = raw[sel] / total
    else:
        gamma[sel] = 1.0 / sel.size
    return gamma


def set_gamma(scheme, partition):
    """Weights over ``partition.members``; zero outside the scheme's support.

    Raises :class:`NoGammaAvailable` when the support is empty. If all raw
    weights are zero the uniform distribution over the support is returned.
    """
    mask = support_mask(scheme, partition)
    if not mask.any():
        raise NoGammaAvailable(f"{scheme.token}: empty support")
    margins = partition.margins
    raw = np.zeros(mask.size)
    raw[mask] = raw_weights(scheme, margins[mask])
    gamma = _normalize(raw, mask)

    if scheme.enforce_condition2 and scheme.mode is Mode.BALANCED:
        mask = mask.copy()
        while True:
            weighted = 0.0
            for g, m in zip(gamma, margins):
                weighted += g * m
            if weighted <= 0.0:
                break
            candidates = np.flatnonzero(mask & (margins > 0.0))
            if candidates.size == 0:
                break
            drop = candidates[np.argmax(margins[candidates])]
            mask[drop] = False
            if not mask.any():
                raise NoGammaAvailable(f"{scheme.token}: condition 2 unreachable")
            gamma = _normalize(raw, mask)
    return gamma


def entropy(gamma):
    out = 0.0
    for g in gamma:
        if g > 0.0:
            out -= g * math.log(g)
    return float(out)
