"""Scripted experiments over synthetic (or supplied) populations.

Four reproductions: inferred-answer counts as the crowd grows, accuracy on
unrevealed questions as the gold set grows, the raw-vs-model-raw skill
scatter, and adaptive-vs-static testing error across budgets.  Every
experiment is reproducible bit for bit from its spec: all sampling is keyed
by (seed, experiment tag, setting), and repetition aggregation runs in a
fixed order.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import adaptive
from .baselines import inferred_answers, infer_variant, majority_vote, model_raw_scores, static_question_set
from .data import GoldSet, ModelVariant, PriorSpec, ResponseDataset
from .ep import EpConfig
from .prob import Gaussian1D
from .synth import SynthConfig

__all__ = [
    "ExperimentSpec",
    "MetricReport",
    "default_population",
    "run_crowd_curve",
    "run_gold_curve",
    "run_scatter_skill",
    "run_adaptive_vs_static",
    "run_experiment",
    "metrics",
    "rmse",
    "r_squared",
    "accuracy",
]

EXPERIMENTS = ("crowd-curve", "gold-curve", "scatter-skill", "adaptive-vs-static")

_TAG_CROWD = 101
_TAG_GOLD = 102


def default_population(priors: PriorSpec, seed: int) -> SynthConfig:
    """Stand-in population of 120 x 60 x 8 with a wide difficulty spread
    (difficulty mean 0.5, sd 1.5), so even the full crowd cannot infer
    every answer and skill scatter stays informative."""
    gen = PriorSpec(
        ability_prior=priors.ability_prior,
        difficulty_prior=Gaussian1D(0.5, 2.25),
        precision_prior=priors.precision_prior,
        discrimination=priors.discrimination,
    )
    return SynthConfig(
        num_participants=120,
        num_questions=60,
        num_options=8,
        priors=gen,
        seed=seed,
        response_density=1.0,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    data: ResponseDataset
    gold: GoldSet
    priors: PriorSpec
    repetitions: int = 200
    crowd_sizes: tuple = ()
    reveal_counts: tuple = ()
    budgets: tuple = ()
    gold_crowd_size: int = 20
    seed: int = 0
    ep_config: EpConfig = field(default_factory=EpConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for name, lst in (
            ("crowd_sizes", self.crowd_sizes),
            ("reveal_counts", self.reveal_counts),
            ("budgets", self.budgets),
        ):
            if lst and tuple(sorted(lst)) != tuple(lst):
                raise ValueError(f"{name} must be sorted, got {lst}")


@dataclass
class MetricReport:
    experiment: str
    row_columns: tuple
    rows: list
    summary_columns: tuple
    summary: list

    def _fmt(self, value) -> str:
        if value is None:
            return "NA"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    def to_tsv(self, which: str = "summary") -> str:
        cols = self.summary_columns if which == "summary" else self.row_columns
        lines = ["\t".join(cols)]
        for row in self.summary if which == "summary" else self.rows:
            lines.append("\t".join(self._fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def rmse(errors) -> float:
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise ValueError("rmse of an empty vector is undefined")
    return float(np.sqrt(np.mean(e * e)))


def r_squared(x, y) -> Optional[float]:
    """Squared Pearson correlation; None when either side has no variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1] ** 2)


def accuracy(predicted, truth) -> float:
    p = list(predicted)
    t = list(truth)
    if len(p) != len(t) or not p:
        raise ValueError("need equal-length non-empty vectors")
    return sum(1 for a, b in zip(p, t) if a == b) / len(p)


def metrics(estimates, truths) -> dict:
    """Standard bundle over paired vectors; undefined entries are None."""
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    return {
        "rmse": rmse(est - tru),
        "r_squared": r_squared(est, tru),
        "accuracy": accuracy(estimates, truths),
    }


def _rng(seed: int, *key: int) -> np.random.Generator:
    material = [seed & 0xFFFFFFFFFFFFFFFF] + [k & 0xFFFFFFFFFFFFFFFF for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(material)))


def _count_correct(answers: dict, gold: GoldSet, question_ids) -> int:
    return sum(1 for q in question_ids if answers.get(q) == gold.get(q))


_CROWD_AGGREGATORS = ("majority", "question-only", "participant-only", "full")

_VARIANT_OF = {
    "question-only": ModelVariant.QUESTION_ONLY,
    "participant-only": ModelVariant.PARTICIPANT_ONLY,
    "full": ModelVariant.FULL,
}


def run_crowd_curve(spec: ExperimentSpec) -> MetricReport:
    """Correctly inferred answers vs crowd size, gold hidden, for majority
    vote and the three model variants."""
    if not spec.crowd_sizes:
        raise ValueError("crowd_sizes required")
    population = list(spec.data.participants)
    if max(spec.crowd_sizes) > len(population):
        raise ValueError(
            f"crowd size {max(spec.crowd_sizes)} exceeds population {len(population)}"
        )
    qids = spec.data.question_ids
    hidden = GoldSet()
    rows = []
    summary = []
    for size in spec.crowd_sizes:
        rng = _rng(spec.seed, _TAG_CROWD, size)
        reps = 1 if size == len(population) else spec.repetitions
        counts = {agg: [] for agg in _CROWD_AGGREGATORS}
        for rep in range(reps):
            subset = sorted(rng.choice(population, size=size, replace=False).tolist())
            crowd = spec.data.subset_participants(subset)
            for agg in _CROWD_AGGREGATORS:
                if agg == "majority":
                    answers = majority_vote(crowd)
                else:
                    report = infer_variant(
                        crowd, hidden, spec.priors, _VARIANT_OF[agg], spec.ep_config
                    )
                    answers = inferred_answers(report.posteriors)
                n = _count_correct(answers, spec.gold, qids)
                counts[agg].append(n)
                rows.append((size, rep, agg, n))
        for agg in _CROWD_AGGREGATORS:
            arr = np.array(counts[agg], dtype=np.float64)
            summary.append(
                (size, agg, float(arr.mean()), float(arr.std(ddof=0)), len(arr))
            )
    return MetricReport(
        experiment="crowd-curve",
        row_columns=("crowd_size", "repetition", "aggregator", "correct_answers"),
        rows=rows,
        summary_columns=("crowd_size", "aggregator", "mean_correct", "sd", "repetitions"),
        summary=summary,
    )


def run_gold_curve(spec: ExperimentSpec) -> MetricReport:
    """Accuracy on unrevealed questions vs number of gold answers revealed."""
    if not spec.reveal_counts:
        raise ValueError("reveal_counts required")
    population = list(spec.data.participants)
    qids = list(spec.data.question_ids)
    if max(spec.reveal_counts) >= len(qids):
        raise ValueError("reveal counts must leave at least one question hidden")
    size = min(spec.gold_crowd_size, len(population))
    rows = []
    summary = []
    for reveal in spec.reveal_counts:
        rng = _rng(spec.seed, _TAG_GOLD, reveal)
        accs = []
        for rep in range(spec.repetitions):
            subset = sorted(rng.choice(population, size=size, replace=False).tolist())
            shown = sorted(rng.choice(qids, size=reveal, replace=False).tolist())
            remaining = [q for q in qids if q not in set(shown)]
            crowd = spec.data.subset_participants(subset)
            revealed_gold = GoldSet({q: spec.gold.get(q) for q in shown})
            report = infer_variant(
                crowd, revealed_gold, spec.priors, ModelVariant.FULL, spec.ep_config
            )
            answers = inferred_answers(report.posteriors)
            acc = _count_correct(answers, spec.gold, remaining) / len(remaining)
            accs.append(acc)
            rows.append((reveal, rep, acc))
        arr = np.array(accs)
        summary.append((reveal, float(arr.mean()), float(arr.std(ddof=0)), len(arr)))
    return MetricReport(
        experiment="gold-curve",
        row_columns=("revealed", "repetition", "remaining_accuracy"),
        rows=rows,
        summary_columns=("revealed", "mean_accuracy", "sd", "repetitions"),
        summary=summary,
    )


def run_scatter_skill(spec: ExperimentSpec) -> MetricReport:
    """Raw vs model-raw score scatter with gold hidden; summary is R^2."""
    report = infer_variant(
        spec.data, GoldSet(), spec.priors, ModelVariant.FULL, spec.ep_config
    )
    scores = model_raw_scores(spec.data, report.posteriors, spec.gold)
    rows = [
        (pid, scores.raw_score[pid], scores.model_raw_score[pid])
        for pid in spec.data.participants
    ]
    raw = [r[1] for r in rows]
    model = [r[2] for r in rows]
    r2 = r_squared(raw, model)
    return MetricReport(
        experiment="scatter-skill",
        row_columns=("participant", "raw_score", "model_raw_score"),
        rows=rows,
        summary_columns=("metric", "value"),
        summary=[("r_squared", r2), ("participants", len(rows))],
    )


def _replay_recorded(data: ResponseDataset, participant_id: str) -> dict:
    return {
        r.question_id: r.response
        for r in data.records
        if r.participant_id == participant_id
    }


def run_adaptive_vs_static(spec: ExperimentSpec) -> MetricReport:
    """RMSE of estimated vs true raw score, static question sets against
    adaptive per-participant selection, across budgets.

    Greedy selection never consults the remaining budget, so one adaptive
    replay to the largest budget yields every smaller budget's estimate as
    a prefix -- identical to running each budget separately.
    """
    if not spec.budgets:
        raise ValueError("budgets required")
    qids = list(spec.data.question_ids)
    if max(spec.budgets) > len(qids):
        raise ValueError("budget exceeds question count")
    static_sets = {b: static_question_set(spec.data, spec.gold, b) for b in spec.budgets}
    max_budget = max(spec.budgets)
    budget_set = set(spec.budgets)

    errors = {(arm, b): [] for arm in ("static", "adaptive") for b in spec.budgets}
    rows = []
    for pid in spec.data.participants:
        recorded = _replay_recorded(spec.data, pid)
        answered = set(recorded)
        if len(answered) < len(qids):
            # sparse rows cannot replay every budget faithfully; skip them
            continue
        true_raw = sum(
            1 for q, r in recorded.items() if spec.gold.get(q) == r
        )
        cal = adaptive.calibrate(
            spec.data, spec.gold, spec.priors, spec.ep_config, exclude_participant=pid
        )
        base = adaptive.new_session(
            pid, spec.data, spec.gold, spec.priors, cal, max_budget, spec.ep_config
        )

        sess = base
        while len(sess.asked) < max_budget:
            q = adaptive.next_question(sess)
            sess = adaptive.submit_response(sess, q, recorded[q])
            step = len(sess.asked)
            if step in budget_set:
                est = adaptive.estimate_raw_score(sess)
                errors[("adaptive", step)].append(est - true_raw)
                rows.append((pid, "adaptive", step, est, true_raw))

        for b in spec.budgets:
            sess = adaptive.new_session(
                pid, spec.data, spec.gold, spec.priors, cal, b, spec.ep_config
            )
            for q in static_sets[b]:
                sess = adaptive.submit_response(sess, q, recorded[q])
            est = adaptive.estimate_raw_score(sess)
            errors[("static", b)].append(est - true_raw)
            rows.append((pid, "static", b, est, true_raw))

    summary = []
    for b in spec.budgets:
        for arm in ("static", "adaptive"):
            err = np.asarray(errors[(arm, b)])
            r = rmse(err)
            # delta-method standard error of the RMSE estimate
            se = (
                float(np.std(err**2, ddof=0) / (2.0 * r * math.sqrt(err.size)))
                if r > 0
                else 0.0
            )
            summary.append((b, arm, r, se, int(err.size)))
    return MetricReport(
        experiment="adaptive-vs-static",
        row_columns=("participant", "arm", "budget", "estimate", "true_raw"),
        rows=rows,
        summary_columns=("budget", "arm", "rmse", "rmse_se", "participants"),
        summary=summary,
    )


def run_experiment(spec: ExperimentSpec) -> MetricReport:
    runner = {
        "crowd-curve": run_crowd_curve,
        "gold-curve": run_gold_curve,
        "scatter-skill": run_scatter_skill,
        "adaptive-vs-static": run_adaptive_vs_static,
    }[spec.experiment]
    return runner(spec)
