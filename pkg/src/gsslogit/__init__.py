"""Group spike-and-slab variable selection for high-dimensional logistic regression."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConsistencyError,
    DegenerateColumnError,
    GroupedDesign,
    Hyperparams,
    IllConditionedError,
    InitPolicy,
    MetricSet,
    PosteriorDraws,
    SelectionReport,
    StructuralError,
    default_hyperparams,
    validate_design,
)
from .inference import compute_metrics, refit_glm, select_median_probability_model, summarize  # noqa: E402
from .pipeline import fit, run_batch, run_replication  # noqa: E402
from .sampler_gibbs import run_gibbs  # noqa: E402
from .sampler_neuronized import run_neuronized  # noqa: E402
from .simulate import SimConfig, gen_dataset  # noqa: E402

__all__ = [
    "ConsistencyError",
    "DegenerateColumnError",
    "GroupedDesign",
    "Hyperparams",
    "IllConditionedError",
    "InitPolicy",
    "MetricSet",
    "PosteriorDraws",
    "SelectionReport",
    "SimConfig",
    "StructuralError",
    "compute_metrics",
    "default_hyperparams",
    "fit",
    "gen_dataset",
    "refit_glm",
    "run_batch",
    "run_gibbs",
    "run_neuronized",
    "run_replication",
    "select_median_probability_model",
    "summarize",
    "validate_design",
]
