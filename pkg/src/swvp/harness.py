"""
Replicated HMM experiments: per replica, sample a model and a dataset, train
every SWVP variant over a beta grid, choose beta on dev, score on test, and
compare against an untuned perceptron.

Reports are line-delimited JSON records (config echo, per-replica seeds,
one record per trained cell, per-replica selections, per-model summary)
written with sorted keys so that fixed seeds give byte-identical files.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import JJPolicy
from .features import FeatureIndex
from .gamma import MODEL_TOKENS, GammaScheme
from .inference import decode_many
from .synth import get_setup, sample_dataset, sample_model, split_dataset
from .trainers import TrainConfig, train_csp, train_swvp

DEFAULT_BETA_GRID = tuple(0.5 * k for k in range(1, 11))
GENER_MARGIN = 0.005  # half an accuracy point
REPORT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    setup: int = 1
    scale: str = "desk"
    splits: tuple | None = None
    length: int | None = None
    replicas: int = 5
    models: tuple = MODEL_TOKENS
    beta_grid: tuple = DEFAULT_BETA_GRID
    seed: int = 0
    epochs: int = 10
    shuffle: bool = False
    average: bool = False
    enforce_condition2: bool = False
    jj_policy: str = "single"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "models", tuple(str(m).upper() for m in self.models))
        set_(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        if self.splits is not None:
            set_(self, "splits", tuple(int(s) for s in self.splits))
            if len(self.splits) != 3 or min(self.splits) < 1:
                raise ConfigError("splits must be three positive sizes (train, dev, test)")
        for m in self.models:
            if m not in MODEL_TOKENS:
                raise ConfigError(f"unknown model token {m!r}; expected one of {MODEL_TOKENS}")
        if not self.models:
            raise ConfigError("models must be non-empty")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model tokens")
        if not self.beta_grid or min(self.beta_grid) <= 0:
            raise ConfigError("beta_grid must be non-empty and positive")
        if self.replicas < 1 or self.epochs < 1:
            raise ConfigError("replicas and epochs must be positive")
        if self.scale not in ("desk", "paper"):
            raise ConfigError(f"unknown scale {self.scale!r}")
        if self.length is not None and self.length < 1:
            raise ConfigError("length must be positive")
        JJPolicy(self.jj_policy)
        get_setup(self.setup, self.scale)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def setup_spec(self):
        spec = get_setup(self.setup, self.scale)
        return spec.scaled(splits=self.splits, length=self.length)

    def to_record(self):
        d = asdict(self)
        d["splits"] = list(self.setup_spec().splits)
        d["length"] = self.setup_spec().length
        d["models"] = list(self.models)
        d["beta_grid"] = list(self.beta_grid)
        return d


def accuracy(w, data, index):
    """Fraction of positions whose decoded label matches gold, over all positions."""
    if not data:
        raise ValueError("empty evaluation set")
    correct = 0
    total = 0
    by_len = {}
    for ex in data:
        by_len.setdefault(ex.length, []).append(ex)
    for _, group in sorted(by_len.items()):
        X = np.stack([ex.x for ex in group])
        Y = np.stack([ex.y for ex in group])
        pred = decode_many(X, w, index)
        correct += int((pred == Y).sum())
        total += Y.size
    return correct / total


def select_beta(cells):
    """Cell with the highest dev accuracy; ties go to the smallest beta.

    ``cells`` are mappings with ``beta`` and ``dev_acc``; test scores are not read.
    """
    if not cells:
        raise ValueError("no cells to select from")
    return min(cells, key=lambda c: (-c["dev_acc"], c["beta"]))


def replica_seeds(seed, replicas):
    """Independent (model, data, train) seeds per replica, from one root seed."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(replicas):
        model, data, train = (int(s.generate_state(1, dtype=np.uint32)[0]) for s in child.spawn(3))
        out.append({"model": model, "data": data, "train": train})
    return out


def _cell(config, token, beta, train, dev, test, index, seed):
    tc = TrainConfig(
        max_epochs=config.epochs,
        averaging=True,
        seed=seed,
        shuffle=config.shuffle,
    )
    if token == "CSP":
        res = train_csp(train, index, tc)
    else:
        scheme = GammaScheme.parse(token, beta, config.enforce_condition2)
        tc = TrainConfig(
            max_epochs=config.epochs,
            scheme=scheme,
            jj_policy=config.jj_policy,
            averaging=True,
            seed=seed,
            shuffle=config.shuffle,
        )
        res = train_swvp(train, index, tc)
    rec = {
        "model": token,
        "beta": beta,
        "updates": res.updates,
        "mistakes": res.mistakes,
        "epochs_run": res.epochs_run,
        "converged": res.converged,
        "backoffs": res.backoffs,
    }
    # both weight versions are scored; config.average picks the reported one
    for tag, w in (("last", res.w), ("avg", res.w_avg)):
        rec[f"dev_acc_{tag}"] = accuracy(w, dev, index)
        rec[f"test_acc_{tag}"] = accuracy(w, test, index)
    tag = "avg" if config.average else "last"
    rec["dev_acc"] = rec[f"dev_acc_{tag}"]
    rec["test_acc"] = rec[f"test_acc_{tag}"]
    return rec


def run_replica(config, replica, seeds):
    spec = config.setup_spec()
    params = sample_model(spec, seeds["model"])
    data = sample_dataset(params, spec.n_items, spec.length, seeds["data"])
    train, dev, test = split_dataset(data, spec.splits)
    index = FeatureIndex(spec.n_obs, spec.n_labels)
    cells = []
    for token in config.models:
        betas = (None,) if token == "CSP" else config.beta_grid
        for beta in betas:
            rec = _cell(config, token, beta, train, dev, test, index, seeds["train"])
            rec.update(type="cell", replica=replica)
            cells.append(rec)
    cells.sort(key=lambda c: (config.models.index(c["model"]), c["beta"] or 0.0))
    return cells


def select_replica(config, replica, cells):
    """Dev-based beta choice per SWVP model and the comparison against CSP."""
    out = {"type": "selection", "replica": replica, "models": {}}
    csp = next((c for c in cells if c["model"] == "CSP"), None)
    best = None
    for token in config.models:
        if token == "CSP":
            continue
        group = [c for c in cells if c["model"] == token]
        chosen = select_beta(group)
        best_test = max(c["test_acc"] for c in group)
        entry = {
            "beta": chosen["beta"],
            "dev_acc": chosen["dev_acc"],
            "test_acc": chosen["test_acc"],
            "best_test_acc": best_test,
            "gener": chosen["test_acc"] >= best_test - GENER_MARGIN,
            "win": None if csp is None else chosen["test_acc"] > csp["test_acc"],
        }
        out["models"][token] = entry
        if best is None or entry["dev_acc"] > out["models"][best]["dev_acc"]:
            best = token
    if csp is not None:
        out["csp_test_acc"] = csp["test_acc"]
    out["best_swvp"] = best
    if best is not None and csp is not None:
        out["best_swvp_wins"] = out["models"][best]["test_acc"] > csp["test_acc"]
    return out


def _mean_std(values):
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


def summarize(config, selections, cells):
    rows = {}
    for token in config.models:
        if token == "CSP":
            accs = [c["test_acc"] for c in cells if c["model"] == "CSP"]
            wins = gener = None
        else:
            entries = [s["models"][token] for s in selections]
            accs = [e["test_acc"] for e in entries]
            wins = sum(bool(e["win"]) for e in entries) if "CSP" in config.models else None
            gener = sum(e["gener"] for e in entries)
        mean, std = _mean_std(accs)
        rows[token] = {"mean_acc": mean, "std_acc": std, "wins": wins, "gener": gener}
    best_wins = [s.get("best_swvp_wins") for s in selections]
    return {
        "type": "summary",
        "models": rows,
        "replicas": len(selections),
        "best_swvp_wins": None if None in best_wins else sum(best_wins),
        "weights": "averaged" if config.average else "last",
    }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    seeds: list
    cells: list
    selections: list
    summary: dict
    records: list = field(default_factory=list, repr=False)

    def to_jsonl(self):
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    def table(self):
        return render_table(self.records)


def run_experiment(config, progress=None):
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(dict(config))
    seeds = replica_seeds(config.seed, config.replicas)
    records = [{"type": "config", "version": REPORT_VERSION, "config": config.to_record()}]
    all_cells, selections = [], []
    for r, s in enumerate(seeds):
        records.append({"type": "replica", "replica": r, "seeds": s})
        cells = run_replica(config, r, s)
        sel = select_replica(config, r, cells)
        all_cells.extend(cells)
        selections.append(sel)
        records.extend(cells)
        records.append(sel)
        if progress is not None:
            progress(r, sel)
    summary = summarize(config, selections, all_cells)
    records.append(summary)
    return ExperimentReport(config, seeds, all_cells, selections, summary, records)


def read_report(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _fmt(v):
    return "-" if v is None else str(v)


def render_table(records):
    """Text table of a report: accuracy (std) in percent, wins vs CSP, gener count."""
    summary = next(r for r in records if r["type"] == "summary")
    cfg = next(r for r in records if r["type"] == "config")["config"]
    lines = [
        f"setup{cfg['setup']} scale={cfg['scale']} splits={cfg['splits']} "
        f"replicas={summary['replicas']} epochs={cfg['epochs']} weights={summary['weights']}",
        f"{'Model':<8} {'Acc. (std)':>16} {'# Wins':>7} {'Gener.':>7}",
    ]
    for token in cfg["models"]:
        row = summary["models"][token]
        acc = f"{100 * row['mean_acc']:.2f} ({100 * row['std_acc']:.2f})"
        lines.append(f"{token:<8} {acc:>16} {_fmt(row['wins']):>7} {_fmt(row['gener']):>7}")
    sels = [r for r in records if r["type"] == "selection"]
    swvp = [t for t in cfg["models"] if t != "CSP"]
    if swvp:
        lines.append("chosen beta per replica:")
        for token in swvp:
            betas = " ".join(_fmt(s["models"][token]["beta"]) for s in sels)
            lines.append(f"  {token:<6} {betas}")
    if summary.get("best_swvp_wins") is not None:
        lines.append(
            f"best dev-selected SWVP beats CSP on {summary['best_swvp_wins']}/{summary['replicas']} replicas"
        )
    return "\n".join(lines)


def cell_is_populated(rec):
    return all(
        isinstance(rec.get(k), float) and 0.0 <= rec[k] <= 1.0 and not math.isnan(rec[k])
        for k in ("dev_acc", "test_acc")
    )
