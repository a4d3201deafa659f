"""Crowd answer aggregation and adaptive testing.

Jointly infers correct answers, question difficulties/discriminations, and
participant abilities from a sparse multiple-choice response matrix, and
drives live test sessions by expected entropy reduction.
"""

from ._backend import BACKEND
from .data import (
    CellPosterior,
    Discrimination,
    GoldSet,
    ModelVariant,
    Posteriors,
    PriorSpec,
    QuestionSpec,
    ResponseDataset,
    ResponseRecord,
    Violation,
    default_priors,
    validate,
)
from .ep import EpConfig, InferenceReport, cell_message_update, infer, predictive_response
from .graph import FactorGraphDescription, GraphValidationError, build_graph
from .prob import (
    Discrete,
    GammaDist,
    Gaussian1D,
    NegligibleEvidenceError,
    gaussian_entropy,
    log_std_normal_cdf,
    prob_correct,
    probit_factor_moments,
    std_normal_cdf,
    std_normal_pdf,
)

__version__ = "0.1.0"
