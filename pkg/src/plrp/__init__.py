"""Layer-wise relevance propagation with per-layer relevance pruning.

A small numpy network engine (dense, conv, ReLU, max pooling, flatten)
with recorded forward passes, baseline relevance propagation under a
composite rule assignment, two pruned-propagation variants that conserve
relevance mass, an attribution evaluation suite, synthetic datasets with
ground truth, and a CLI that drives the whole pipeline.
"""

from .datagen import (
    GenomeDataset,
    GenomeSample,
    ShapeDataset,
    ShapeImageSample,
    gen_genome_dataset,
    gen_shape_dataset,
    load_dataset,
    save_dataset,
)
from .errors import (
    DataError,
    EmptySupportError,
    InvalidModelError,
    ModelFormatError,
    NumericalError,
    PlrpError,
    ShapeMismatchError,
    TrainingDivergedError,
    ZeroDenominatorError,
)
from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU
from .lrp import (
    PruneRecord,
    RelevanceTrace,
    RuleAssignment,
    backward_lrp,
    explain_lrp,
    load_trace,
    save_trace,
)
from .metrics import FlipResult, entropy, gini, lipschitz_estimate, pixel_flip, rma
from .model import ActivationTrace, Model, forward
from .model_io import load_model, save_model
from .presets import GENOME_MOTIFS, PRESETS, genome_cnn, shape_cnn
from .pruning import (
    PruningConfig,
    ThresholdResult,
    explain_plrp,
    load_config,
    prune_lambda,
    propagate_pruned_matrix,
    save_config,
    split_signs,
    threshold_for_gain,
    threshold_for_mass,
)
from .rules import (
    EpsilonRule,
    GammaRule,
    Lrp0Rule,
    ZBoxRule,
    lrp0_matrix,
    propagate_epsilon,
    propagate_gamma,
    propagate_lrp0,
    propagate_max_pool,
    propagate_zbox,
)
from .training import evaluate_accuracy, train_sgd

__version__ = "0.1.0"
