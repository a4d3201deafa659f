"""Reference aggregators and scoring rules.

Majority vote (equivalent, at the argmax level, to the question-only model
variant), the model-variant wrapper, raw/model-raw score counting, and the
solve-rate partition heuristic for choosing a static question set.  All tie
breaks go to the lowest index for cross-platform determinism.
"""

from dataclasses import dataclass
from typing import Optional

from .data import GoldSet, ModelVariant, Posteriors, PriorSpec, ResponseDataset
from .ep import EpConfig, InferenceReport, infer
from .graph import build_graph

__all__ = [
    "ScoreVector",
    "majority_vote",
    "infer_variant",
    "model_raw_scores",
    "static_question_set",
]

ABSTAIN = None


@dataclass(frozen=True)
class ScoreVector:
    """Per-participant response counts against gold and against the model's
    inferred answers."""

    raw_score: dict          # participant_id -> int (vs gold), {} if no gold given
    model_raw_score: dict    # participant_id -> int (vs inferred answers)


def majority_vote(data: ResponseDataset) -> dict:
    """Modal response per question; lowest option index wins ties; questions
    without responses map to None (abstain)."""
    counts = {q.question_id: [0] * q.num_options for q in data.questions}
    for rec in data.records:
        counts[rec.question_id][rec.response] += 1
    out = {}
    for q in data.questions:
        c = counts[q.question_id]
        best = max(c)
        out[q.question_id] = c.index(best) if best > 0 else ABSTAIN
    return out


def infer_variant(
    data: ResponseDataset,
    gold: GoldSet,
    priors: PriorSpec,
    variant: ModelVariant,
    config: EpConfig = EpConfig(),
) -> InferenceReport:
    """Inference under one of the model variants (thin graph-building wrapper)."""
    return infer(build_graph(data, gold, priors, variant), config)


def inferred_answers(posteriors: Posteriors, tie_eps: float = 0.0) -> dict:
    """Mode of each answer distribution; ties to the lowest option index."""
    return {qid: dist.mode(tie_eps) for qid, dist in posteriors.answer_dist.items()}


def model_raw_scores(
    data: ResponseDataset,
    posteriors: Posteriors,
    gold: Optional[GoldSet] = None,
) -> ScoreVector:
    """Counts of each participant's responses matching the inferred answers,
    and matching gold when the evaluator supplies it."""
    answers = inferred_answers(posteriors)
    model = {p: 0 for p in data.participants}
    raw = {p: 0 for p in data.participants}
    for rec in data.records:
        if answers.get(rec.question_id) == rec.response:
            model[rec.participant_id] += 1
        if gold is not None and gold.get(rec.question_id) == rec.response:
            raw[rec.participant_id] += 1
    return ScoreVector(
        raw_score=raw if gold is not None else {},
        model_raw_score=model,
    )


def solve_rates(data: ResponseDataset, gold: GoldSet) -> dict:
    """Fraction of responding participants whose response matched gold.

    Counts only participants who answered the question (robust to sparse
    matrices); questions nobody answered get rate None.
    """
    hit = {q.question_id: 0 for q in data.questions}
    n = {q.question_id: 0 for q in data.questions}
    for rec in data.records:
        n[rec.question_id] += 1
        if gold.get(rec.question_id) == rec.response:
            hit[rec.question_id] += 1
    return {
        qid: (hit[qid] / n[qid] if n[qid] > 0 else None) for qid in hit
    }


def static_question_set(data: ResponseDataset, gold: GoldSet, budget: int) -> list:
    """Questions whose empirical solve rates best partition the population.

    Targets the rates i/(budget+1), i = 1..budget; for each target in turn
    picks the unused question with the nearest solve rate, ties to the
    lowest question id.  Requires gold for every question (the calibrated
    test setting).
    """
    if budget < 1 or budget > len(data.questions):
        raise ValueError(
            f"budget must be in 1..{len(data.questions)}, got {budget}"
        )
    missing = [q.question_id for q in data.questions if q.question_id not in gold]
    if missing:
        raise ValueError(f"gold answers required for all questions; missing {missing}")
    rates = solve_rates(data, gold)
    available = sorted(qid for qid, rate in rates.items() if rate is not None)
    if len(available) < budget:
        raise ValueError(
            f"only {len(available)} questions have responses; budget {budget}"
        )
    chosen = []
    for i in range(1, budget + 1):
        target = i / (budget + 1)
        best = min(available, key=lambda qid: (abs(rates[qid] - target), qid))
        chosen.append(best)
        available.remove(best)
    return chosen
