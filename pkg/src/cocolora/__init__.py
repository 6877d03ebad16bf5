"""Context-conditioned Bayesian low-rank adapters over a frozen backbone.

The package trains low-rank adapters whose rank-space latent carries a
per-example diagonal Gaussian posterior conditioned on the adapter's own
text projection and, for the full method, on an audio-derived context
vector. Deterministic LoRA, an input-independent Bayesian variant, a
text-only contextual variant, and an early-fusion MLP serve as baselines.
"""

from .adapters import ADAPTER_FAMILIES, FAMILIES, inference_head_param_count, latent_dim
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, SyntheticSpec, generate_synthetic, kfold_split, load_jsonl, save_jsonl
from .errors import (
    CocoLoraError,
    ConfigError,
    DataError,
    MetricError,
    NumericError,
    ShapeError,
)
from .estimator import ContextualLoraClassifier
from .evaluation import (
    PredictiveResult,
    auc,
    ece,
    evaluate_model,
    heteroscedasticity_report,
    macro_auc,
    nll_metric,
    predict,
    predict_batch,
    spearman,
)
from .model import Model, ModelConfig
from .numerics import SeededRng, finite_difference_gradient
from .training import AdamW, TrainConfig, elbo_loss, gradient_check, train
from .variational import (
    DiagonalGaussian,
    IsotropicPrior,
    kl_to_isotropic_prior,
    mc_kl_estimate,
    reparameterize,
    scaled_softplus_std,
)

__version__ = "0.1.0"

__all__ = [
    "ADAPTER_FAMILIES",
    "AdamW",
    "CocoLoraError",
    "ConfigError",
    "ContextualLoraClassifier",
    "DataError",
    "Dataset",
    "DiagonalGaussian",
    "FAMILIES",
    "IsotropicPrior",
    "MetricError",
    "Model",
    "ModelConfig",
    "NumericError",
    "PredictiveResult",
    "SeededRng",
    "ShapeError",
    "SyntheticSpec",
    "TrainConfig",
    "auc",
    "ece",
    "elbo_loss",
    "evaluate_model",
    "finite_difference_gradient",
    "generate_synthetic",
    "gradient_check",
    "heteroscedasticity_report",
    "inference_head_param_count",
    "kfold_split",
    "kl_to_isotropic_prior",
    "latent_dim",
    "load_checkpoint",
    "load_jsonl",
    "macro_auc",
    "mc_kl_estimate",
    "nll_metric",
    "predict",
    "predict_batch",
    "reparameterize",
    "save_checkpoint",
    "save_jsonl",
    "scaled_softplus_std",
    "spearman",
    "train",
]
