"""Declarative factor-graph description in array form.

One ability variable per participant; one difficulty, precision, and answer
variable per question; one gated cell factor per observed record.  Observed
answers and variant ablations are represented as tiny-variance point-mass
priors so that message passing treats observed and latent variables
uniformly; the inference kernels recognize the clamp and keep those
marginals pinned.
"""

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ._kernels import CLAMP_PRECISION
from .data import GoldSet, ModelVariant, PriorSpec, ResponseDataset, validate
from .prob import POINT_MASS_VARIANCE

__all__ = ["FactorGraphDescription", "GraphValidationError", "build_graph"]

assert 1.0 / POINT_MASS_VARIANCE >= CLAMP_PRECISION


class GraphValidationError(ValueError):
    """Raised when a graph is requested over inconsistent inputs."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "invalid dataset/gold inputs:\n" + "\n".join(str(v) for v in self.violations)
        )


@dataclass
class FactorGraphDescription:
    """Immutable array view of the model over one dataset."""

    participant_ids: tuple
    question_ids: tuple
    num_options: np.ndarray      # int64 [Q]
    gold_idx: np.ndarray         # int64 [Q], -1 where unknown
    cell_p: np.ndarray           # int64 [C], question-major participant-minor order
    cell_q: np.ndarray           # int64 [C]
    cell_r: np.ndarray           # int64 [C]
    ability_prec0: np.ndarray    # float64 [P]
    ability_pm0: np.ndarray      # float64 [P]  (precision * mean)
    difficulty_prec0: np.ndarray # float64 [Q]
    difficulty_pm0: np.ndarray   # float64 [Q]
    precision_shape0: np.ndarray # float64 [Q]
    precision_rate0: np.ndarray  # float64 [Q]
    learned_tau: bool
    tau_fixed: np.ndarray        # float64 [Q], valid when not learned_tau
    priors: PriorSpec
    variant: ModelVariant

    def __post_init__(self):
        for arr in (
            self.num_options, self.gold_idx, self.cell_p, self.cell_q, self.cell_r,
            self.ability_prec0, self.ability_pm0, self.difficulty_prec0,
            self.difficulty_pm0, self.precision_shape0, self.precision_rate0,
            self.tau_fixed,
        ):
            arr.setflags(write=False)

    @property
    def num_participants(self) -> int:
        return len(self.participant_ids)

    @property
    def num_questions(self) -> int:
        return len(self.question_ids)

    @property
    def num_latent_variables(self) -> int:
        # ability per participant; difficulty, precision, answer per question
        return self.num_participants + 3 * self.num_questions

    @property
    def num_cell_factors(self) -> int:
        return int(self.cell_p.size)

    @property
    def y_offsets(self) -> np.ndarray:
        off = np.zeros(self.num_questions + 1, dtype=np.int64)
        np.cumsum(self.num_options, out=off[1:])
        return off


def build_graph(
    data: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    variant: ModelVariant = ModelVariant.FULL,
    *,
    difficulty_clamps: Optional[Mapping[str, float]] = None,
    precision_clamps: Optional[Mapping[str, float]] = None,
) -> FactorGraphDescription:
    """Assemble the factor graph for a dataset.

    ``difficulty_clamps`` / ``precision_clamps`` pin individual questions to
    known values (used by calibrated test sessions); ``precision_clamps``
    must cover every question when given, turning discrimination into a
    per-question fixed quantity.
    """
    violations = validate(data, gold)
    if violations:
        raise GraphValidationError(violations)

    n_p = len(data.participants)
    n_q = len(data.questions)
    num_options = np.array([q.num_options for q in data.questions], dtype=np.int64)

    gold_idx = np.full(n_q, -1, dtype=np.int64)
    for qid, option in gold.items():
        gold_idx[data.question_index[qid]] = option

    cell_p = np.array(
        [data.participant_index[r.participant_id] for r in data.records], dtype=np.int64
    )
    cell_q = np.array(
        [data.question_index[r.question_id] for r in data.records], dtype=np.int64
    )
    cell_r = np.array([r.response for r in data.records], dtype=np.int64)
    order = np.lexsort((cell_p, cell_q))
    cell_p, cell_q, cell_r = cell_p[order], cell_q[order], cell_r[order]

    ab = priors.ability_prior
    if variant is ModelVariant.QUESTION_ONLY:
        ability_var = np.full(n_p, POINT_MASS_VARIANCE)
    else:
        ability_var = np.full(n_p, ab.variance)
    ability_prec0 = 1.0 / ability_var
    ability_pm0 = ab.mean * ability_prec0

    di = priors.difficulty_prior
    difficulty_mean = np.full(n_q, di.mean)
    if variant is ModelVariant.PARTICIPANT_ONLY:
        difficulty_var = np.full(n_q, POINT_MASS_VARIANCE)
    else:
        difficulty_var = np.full(n_q, di.variance)
    if difficulty_clamps:
        for qid, value in difficulty_clamps.items():
            j = data.question_index[qid]
            difficulty_mean[j] = value
            difficulty_var[j] = POINT_MASS_VARIANCE
    difficulty_prec0 = 1.0 / difficulty_var
    difficulty_pm0 = difficulty_mean * difficulty_prec0

    pr = priors.precision_prior
    precision_shape0 = np.full(n_q, pr.shape)
    precision_rate0 = np.full(n_q, pr.rate)

    disc = priors.discrimination
    if precision_clamps is not None:
        missing = [q.question_id for q in data.questions if q.question_id not in precision_clamps]
        if missing:
            raise ValueError(f"precision_clamps must cover all questions; missing {missing}")
        learned = False
        tau_fixed = np.array(
            [float(precision_clamps[q.question_id]) for q in data.questions]
        )
        if np.any(tau_fixed <= 0.0):
            raise ValueError("clamped precisions must be positive")
    elif disc.is_learned:
        learned = True
        tau_fixed = np.full(n_q, np.nan)
    else:
        learned = False
        tau_fixed = np.full(n_q, disc.tau)

    return FactorGraphDescription(
        participant_ids=tuple(data.participants),
        question_ids=data.question_ids,
        num_options=num_options,
        gold_idx=gold_idx,
        cell_p=cell_p,
        cell_q=cell_q,
        cell_r=cell_r,
        ability_prec0=ability_prec0,
        ability_pm0=ability_pm0,
        difficulty_prec0=difficulty_prec0,
        difficulty_pm0=difficulty_pm0,
        precision_shape0=precision_shape0,
        precision_rate0=precision_rate0,
        learned_tau=learned,
        tau_fixed=tau_fixed,
        priors=priors,
        variant=variant,
    )
