"""Structured weighted violations perceptron for linear-chain sequence labeling."""

from .analysis import (
    MistakeBoundReport,
    SeparabilityReport,
    check_theorem1,
    compute_margins,
    compute_mistake_bound,
    find_separator,
)
from .core import JJPolicy, mixed_assignment, partition_violations, substructures, weighted_update
from .features import FeatureIndex, SequenceExample, SparseVector, StructureError, delta_phi, phi
from .gamma import GammaScheme, NoGammaAvailable, set_gamma
from .harness import ExperimentConfig, accuracy, run_experiment, select_beta
from .inference import enumerate_argmax, viterbi_argmax
from .synth import HmmParams, get_setup, sample_dataset, sample_model
from .trainers import TrainConfig, TrainResult, train_csp, train_swvp

__version__ = "0.1.0"
