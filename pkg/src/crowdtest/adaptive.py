"""Adaptive testing: expected-entropy-reduction scoring and session state.

A session tests one live participant against a fully gold-labeled bank
whose difficulties and precisions were calibrated on a reference population
and clamped to their posterior means, so the only latent quantity is the
participant's ability.  Candidate questions are scored by the predictive-
weighted drop in the Gaussian entropy of that ability posterior; scoring
re-runs full inference per response branch.

Sessions are immutable values: submitting a response returns a new state.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .data import GoldSet, ModelVariant, Posteriors, PriorSpec, ResponseDataset
from .ep import EpConfig, infer
from .graph import build_graph
from .prob import Gaussian1D, POINT_MASS_VARIANCE, std_normal_cdf

__all__ = [
    "CalibrationTable",
    "SessionState",
    "QuestionScore",
    "SessionExhausted",
    "calibrate",
    "new_session",
    "entropy_reduction",
    "score_question",
    "next_question",
    "submit_response",
    "estimate_raw_score",
]


logger = logging.getLogger(__name__)


class SessionExhausted(RuntimeError):
    """Budget consumed or nothing scorable remains."""


@dataclass(frozen=True)
class CalibrationTable:
    """Clamp values for a question bank: posterior-mean difficulty and
    precision per question."""

    difficulty_mean: dict
    precision_mean: dict

    @classmethod
    def from_posteriors(cls, posteriors: Posteriors) -> "CalibrationTable":
        return cls(
            difficulty_mean={q: g.mean for q, g in posteriors.difficulty.items()},
            precision_mean={q: g.mean for q, g in posteriors.precision.items()},
        )


def calibrate(
    data: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    config: EpConfig = EpConfig(),
    exclude_participant: Optional[str] = None,
) -> CalibrationTable:
    """Difficulties and precisions inferred from the reference population
    with gold revealed; ``exclude_participant`` supports leave-one-out
    replays without leakage."""
    if exclude_participant is not None:
        keep = [p for p in data.participants if p != exclude_participant]
        data = data.subset_participants(keep)
    report = infer(build_graph(data, gold, priors, ModelVariant.FULL), config)
    return CalibrationTable.from_posteriors(report.posteriors)


@dataclass(frozen=True)
class SessionState:
    participant_id: str
    bank: ResponseDataset
    gold: GoldSet
    priors: PriorSpec
    calibration: CalibrationTable
    budget: int
    asked: tuple                      # ((question_id, response), ...)
    ability_posterior: Gaussian1D
    ep_config: EpConfig

    @property
    def asked_ids(self) -> tuple:
        return tuple(q for q, _ in self.asked)

    @property
    def unasked_ids(self) -> tuple:
        asked = set(self.asked_ids)
        return tuple(q.question_id for q in self.bank.questions if q.question_id not in asked)


def new_session(
    participant_id: str,
    bank: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    calibration: CalibrationTable,
    budget: int,
    ep_config: EpConfig = EpConfig(),
) -> SessionState:
    missing = [q.question_id for q in bank.questions if q.question_id not in gold]
    if missing:
        raise ValueError(f"session bank requires gold for every question; missing {missing}")
    for q in bank.questions:
        if q.question_id not in calibration.difficulty_mean:
            raise ValueError(f"calibration missing difficulty for {q.question_id}")
        if q.question_id not in calibration.precision_mean:
            raise ValueError(f"calibration missing precision for {q.question_id}")
    if not 1 <= budget <= len(bank.questions):
        raise ValueError(f"budget must be in 1..{len(bank.questions)}, got {budget}")
    return SessionState(
        participant_id=participant_id,
        bank=bank,
        gold=gold,
        priors=priors,
        calibration=calibration,
        budget=budget,
        asked=(),
        ability_posterior=priors.ability_prior,
        ep_config=ep_config,
    )


def entropy_reduction(var_before: float, var_after: float) -> float:
    """Drop in Gaussian entropy (nats): 0.5 * ln(var_before / var_after)."""
    if not var_before > 0.0 or not var_after > 0.0:
        raise ValueError(
            f"variances must be positive, got {var_before}, {var_after}"
        )
    return 0.5 * math.log(var_before / var_after)


def _session_arrays(state: SessionState):
    """Cell arrays for the clamped single-ability graph, in the engine's
    question-index order."""
    items = sorted(state.asked, key=lambda qr: state.bank.question_index[qr[0]])
    n = len(items)
    d_hat = np.empty(n)
    tau_hat = np.empty(n)
    k_opt = np.empty(n, dtype=np.int64)
    matches = np.empty(n, dtype=np.int64)
    for i, (qid, r) in enumerate(items):
        d_hat[i] = state.calibration.difficulty_mean[qid]
        tau_hat[i] = state.calibration.precision_mean[qid]
        k_opt[i] = state.bank.num_options(qid)
        matches[i] = 1 if state.gold.get(qid) == r else 0
    return d_hat, tau_hat, k_opt, matches


def _infer_ability(state: SessionState):
    """Full inference over the session's evidence; returns (posterior, converged)."""
    d_hat, tau_hat, k_opt, matches = _session_arrays(state)
    prior = state.priors.ability_prior
    cfg = state.ep_config
    prec, pm, converged, _sweeps, _resid = _kernels.ability_ep(
        d_hat, tau_hat, k_opt, matches,
        prior.precision, prior.precision_mean,
        cfg.max_sweeps, cfg.convergence_eps, cfg.damping,
    )
    return Gaussian1D.from_natural(prec, pm), bool(converged)


def _p_know(state: SessionState, question_id: str, ability: Gaussian1D) -> float:
    d = state.calibration.difficulty_mean[question_id]
    tau = state.calibration.precision_mean[question_id]
    v_t = ability.variance + POINT_MASS_VARIANCE
    return float(std_normal_cdf((ability.mean - d) / math.sqrt(v_t + 1.0 / tau)))


@dataclass(frozen=True)
class QuestionScore:
    question_id: str
    expected_entropy_reduction: float
    breakdown: tuple      # ((response, predictive_prob, var_after), ...)
    reliable: bool

    def recompute_from_breakdown(self, var_before: float) -> float:
        return 0.5 * sum(
            pi * math.log(var_before / va) for _, pi, va in self.breakdown
        )


def _batch_scores(state: SessionState, candidate_ids):
    """Branch variances for many candidates in one kernel call.

    A response influences the model only through whether it matches gold,
    so the two re-inferences per candidate cover every response branch
    exactly (identical evidence arrays give bitwise-identical posteriors).
    """
    d_hat, tau_hat, k_opt, matches = _session_arrays(state)
    asked_idx = sorted(state.bank.question_index[q] for q in state.asked_ids)
    cand_pos = np.array(
        [
            sum(1 for a in asked_idx if a < state.bank.question_index[q])
            for q in candidate_ids
        ],
        dtype=np.int64,
    )
    cand_d = np.array([state.calibration.difficulty_mean[q] for q in candidate_ids])
    cand_tau = np.array([state.calibration.precision_mean[q] for q in candidate_ids])
    cand_k = np.array(
        [state.bank.num_options(q) for q in candidate_ids], dtype=np.int64
    )
    prior = state.priors.ability_prior
    cfg = state.ep_config
    return _kernels.score_branches(
        d_hat, tau_hat, k_opt, matches,
        cand_d, cand_tau, cand_k, cand_pos,
        prior.precision, prior.precision_mean,
        cfg.max_sweeps, cfg.convergence_eps, cfg.damping,
    )


def _candidate_score(
    state: SessionState, question_id: str, v_match: float, v_miss: float, reliable: bool
) -> QuestionScore:
    k = state.bank.num_options(question_id)
    gold_r = state.gold.get(question_id)
    var_before = state.ability_posterior.variance
    p_know = _p_know(state, question_id, state.ability_posterior)
    breakdown = []
    total = 0.0
    for r in range(k):
        if r == gold_r:
            pi = p_know + (1.0 - p_know) / k
            var_after = v_match
        else:
            pi = (1.0 - p_know) / k
            var_after = v_miss
        breakdown.append((r, pi, var_after))
        total += pi * 0.5 * math.log(var_before / var_after)
    return QuestionScore(
        question_id=question_id,
        expected_entropy_reduction=total,
        breakdown=tuple(breakdown),
        reliable=reliable,
    )


def score_question(state: SessionState, question_id: str) -> QuestionScore:
    """Expected entropy reduction of asking one candidate question.

    For each possible response: its predictive probability under the
    current session model, and the ability variance after full re-inference
    with that response appended.  Flagged unreliable if a branch fails to
    converge.  The expectation can be negative; it is reported as is.
    """
    if question_id in state.asked_ids:
        raise ValueError(f"question {question_id} was already asked")
    if question_id not in state.bank.question_index:
        raise ValueError(f"question {question_id} is not in the bank")
    v_match, v_miss, conv = _batch_scores(state, [question_id])
    return _candidate_score(
        state, question_id, float(v_match[0]), float(v_miss[0]), bool(conv[0])
    )


def next_question(state: SessionState) -> str:
    """Unasked question with the highest expected entropy reduction; ties go
    to the lowest question id."""
    if len(state.asked) >= state.budget:
        raise SessionExhausted(f"budget of {state.budget} questions consumed")
    candidates = sorted(state.unasked_ids)
    if not candidates:
        raise SessionExhausted("no unasked questions remain")
    v_match, v_miss, conv = _batch_scores(state, candidates)
    best = None
    best_score = -math.inf
    for i, qid in enumerate(candidates):
        if not conv[i]:
            continue
        score = _candidate_score(
            state, qid, float(v_match[i]), float(v_miss[i]), True
        ).expected_entropy_reduction
        if score > best_score:
            best = qid
            best_score = score
    if best is None:
        raise SessionExhausted("no scorable questions remain")
    if best_score < 0.0:
        # approximate variances can make every candidate look worse than
        # asking nothing; the argmax still applies, but leave a trail
        logger.info(
            "selected %s with negative expected entropy reduction %.3g",
            best, best_score,
        )
    return best


def submit_response(state: SessionState, question_id: str, response: int) -> SessionState:
    """Record a response and recompute the ability posterior by full
    inference over the session's evidence plus calibration clamps."""
    if len(state.asked) >= state.budget:
        raise SessionExhausted(f"budget of {state.budget} questions consumed")
    if question_id not in state.bank.question_index:
        raise ValueError(f"question {question_id} is not in the bank")
    if question_id in state.asked_ids:
        raise ValueError(f"question {question_id} was already answered")
    k = state.bank.num_options(question_id)
    if not 0 <= response < k:
        raise ValueError(f"response {response} outside 0..{k - 1}")
    asked = state.asked + ((question_id, response),)
    interim = SessionState(
        participant_id=state.participant_id,
        bank=state.bank,
        gold=state.gold,
        priors=state.priors,
        calibration=state.calibration,
        budget=state.budget,
        asked=asked,
        ability_posterior=state.ability_posterior,
        ep_config=state.ep_config,
    )
    posterior, _converged = _infer_ability(interim)
    return SessionState(
        participant_id=state.participant_id,
        bank=state.bank,
        gold=state.gold,
        priors=state.priors,
        calibration=state.calibration,
        budget=state.budget,
        asked=asked,
        ability_posterior=posterior,
        ep_config=state.ep_config,
    )


def estimate_raw_score(state: SessionState) -> float:
    """Posterior expectation of the participant's full raw score: observed
    matches plus, per unasked question, the predictive probability that a
    response would match gold."""
    total = 0.0
    for qid, r in state.asked:
        if state.gold.get(qid) == r:
            total += 1.0
    ability = state.ability_posterior
    for qid in state.unasked_ids:
        k = state.bank.num_options(qid)
        p_know = _p_know(state, qid, ability)
        total += p_know + (1.0 - p_know) / k
    return total
