"""
Synthetic sequence data from first-order HMMs.

Each setup fixes alphabet sizes and two base probability vectors; a model
draws every transition row and every emission row as an independent uniform
random permutation of the corresponding base vector. Sequences start from a
uniform prior over hidden states and alternate emission and transition.
"""

import json
from dataclasses import dataclass

import numpy as np

from .features import SequenceExample, StructureError

ROW_TOL = 1e-12


@dataclass(frozen=True)
class SetupSpec:
    name: str
    n_obs: int
    n_labels: int
    transition_base: tuple
    emission_base: tuple
    length: int = 8
    splits: tuple = (7000, 2000, 1000)

    def __post_init__(self):
        if len(self.transition_base) != self.n_labels:
            raise ValueError(f"{self.name}: transition base must have {self.n_labels} entries")
        if len(self.emission_base) != self.n_obs:
            raise ValueError(f"{self.name}: emission base must have {self.n_obs} entries")
        for base in (self.transition_base, self.emission_base):
            if min(base) < 0 or sum(base) <= 0:
                raise ValueError(f"{self.name}: base vectors must be non-negative with positive mass")

    def normalized_bases(self):
        """Base vectors rescaled to sum to one (setup3's emission base has mass 0.9)."""
        t = np.asarray(self.transition_base, dtype=np.float64)
        e = np.asarray(self.emission_base, dtype=np.float64)
        return t / t.sum(), e / e.sum()

    @property
    def n_items(self):
        return sum(self.splits)

    def scaled(self, splits=None, length=None):
        from dataclasses import replace

        return replace(
            self,
            splits=tuple(splits) if splits is not None else self.splits,
            length=length if length is not None else self.length,
        )


def _pad(values, size):
    return tuple(values) + (0.0,) * (size - len(values))


SETUPS = {
    # simple(++), learnable(+++)
    "setup1": SetupSpec("setup1", 5, 3, (0.7, 0.2, 0.1), (0.75, 0.1, 0.05, 0.05, 0.05)),
    # simple(++), learnable(++)
    "setup2": SetupSpec("setup2", 5, 3, (0.5, 0.3, 0.2), (0.6, 0.15, 0.1, 0.1, 0.05)),
    # simple(+), learnable(+)
    "setup3": SetupSpec(
        "setup3",
        20,
        7,
        _pad((0.7, 0.2, 0.1), 7),
        _pad((0.4, 0.2, 0.1, 0.1, 0.1), 20),
    ),
}

DESK_SPLITS = (1000, 300, 200)
PAPER_SPLITS = (7000, 2000, 1000)


def get_setup(name, scale="paper"):
    key = str(name)
    if not key.startswith("setup"):
        key = f"setup{key}"
    if key not in SETUPS:
        raise ValueError(f"unknown setup {name!r}; expected one of {sorted(SETUPS)}")
    spec = SETUPS[key]
    if scale == "desk":
        return spec.scaled(splits=DESK_SPLITS)
    if scale != "paper":
        raise ValueError(f"unknown scale {scale!r}")
    return spec


@dataclass(frozen=True)
class HmmParams:
    n_obs: int
    n_labels: int
    transition: np.ndarray  # (C_y, C_y), row y -> P(y' | y)
    emission: np.ndarray  # (C_y, C_x), row y -> P(x | y)

    def __post_init__(self):
        t = np.array(self.transition, dtype=np.float64)
        e = np.array(self.emission, dtype=np.float64)
        if t.shape != (self.n_labels, self.n_labels) or e.shape != (self.n_labels, self.n_obs):
            raise StructureError("transition/emission shapes do not match alphabet sizes")
        for name, m in (("transition", t), ("emission", e)):
            if (m < 0).any() or np.abs(m.sum(axis=1) - 1.0).max() > ROW_TOL:
                raise StructureError(f"{name} rows must be probability distributions")
        t.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "emission", e)

    @property
    def prior(self):
        return np.full(self.n_labels, 1.0 / self.n_labels)

    def to_dict(self):
        return {
            "n_obs": self.n_obs,
            "n_labels": self.n_labels,
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["n_obs"], d["n_labels"], np.array(d["transition"]), np.array(d["emission"]))


def sample_model(spec, seed):
    """Draw an HMM whose rows are independent permutations of the setup's base vectors."""
    rng = np.random.default_rng(seed)
    tb, eb = spec.normalized_bases()
    transition = np.stack([rng.permutation(tb) for _ in range(spec.n_labels)])
    emission = np.stack([rng.permutation(eb) for _ in range(spec.n_labels)])
    return HmmParams(spec.n_obs, spec.n_labels, transition, emission)


def _cdf(rows):
    cdf = np.cumsum(rows, axis=1)
    # from the last positive-mass category on, the cdf is +inf so rounding
    # (cdf[-1] slightly below 1) can never select a zero-mass category
    last = rows.shape[1] - 1 - np.argmax(rows[:, ::-1] > 0, axis=1)
    cdf[np.arange(rows.shape[1])[None, :] >= last[:, None]] = np.inf
    return cdf


def _draw(cdf_rows, u):
    # first category whose cumulative mass exceeds u
    return (u[:, None] >= cdf_rows).sum(axis=1)


def sample_arrays(params, n_items, length, seed):
    """Observation and label arrays of shape ``(n_items, length)``, values 1-based."""
    if n_items < 1 or length < 1:
        raise ValueError("n_items and length must be positive")
    rng = np.random.default_rng(seed)
    t_cdf = _cdf(params.transition)
    e_cdf = _cdf(params.emission)
    X = np.empty((n_items, length), dtype=np.int64)
    Y = np.empty((n_items, length), dtype=np.int64)
    y = rng.integers(0, params.n_labels, size=n_items)
    for i in range(length):
        Y[:, i] = y
        X[:, i] = _draw(e_cdf[y], rng.random(n_items))
        if i < length - 1:
            y = _draw(t_cdf[y], rng.random(n_items))
    return X + 1, Y + 1


def sample_dataset(params, n_items, length, seed):
    X, Y = sample_arrays(params, n_items, length, seed)
    return [SequenceExample(x, y) for x, y in zip(X, Y)]


def split_dataset(data, splits):
    if sum(splits) > len(data):
        raise ValueError(f"splits {splits} need {sum(splits)} items, have {len(data)}")
    out = []
    at = 0
    for n in splits:
        out.append(data[at : at + n])
        at += n
    return out


def write_dataset(path, data):
    """One sequence per line: ``x1 ... xL<TAB>y1 ... yL``."""
    with open(path, "w") as fh:
        for ex in data:
            fh.write(" ".join(map(str, ex.x)) + "\t" + " ".join(map(str, ex.y)) + "\n")


def read_dataset(path):
    data = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                xs, ys = line.split("\t")
                data.append(SequenceExample([int(v) for v in xs.split()], [int(v) for v in ys.split()]))
            except ValueError as exc:
                raise StructureError(f"{path}:{lineno}: {exc}") from None
    return data


def write_params(path, params):
    with open(path, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")


def read_params(path):
    with open(path) as fh:
        return HmmParams.from_dict(json.load(fh))
