"""Dirichlet-based prediction calibration for learning with noisy labels."""

from .calibration import calibrated_softmax, gradient_shrinkage, logits_to_dirichlet, softmax
from .config import ExperimentSpec, TrainConfig
from .losses import EDLLossConfig, edl_loss, kl_loss, nll_loss
from .selection import fit_gmm, margin, selection_auc
from .training import fit

__version__ = "0.1.0"
