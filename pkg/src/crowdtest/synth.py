"""Sampler from the generative model, with known ground truth.

Draw abilities, difficulties, and precisions from their priors, a uniform
correct answer per question, then per cell: correctness from the probit of
the ability-difficulty gap, and the response either copying the correct
answer or drawn uniformly over all options (including the correct one).

Every random quantity comes from its own generator keyed by
(seed, kind, indices), so cell samples are independent of generation order
and stable under parallel generation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import GoldSet, PriorSpec, QuestionSpec, ResponseDataset, ResponseRecord
from .prob import std_normal_cdf

__all__ = ["SynthConfig", "SynthTruth", "sample"]

_KIND_ABILITY = 1
_KIND_DIFFICULTY = 2
_KIND_PRECISION = 3
_KIND_GOLD = 4
_KIND_CELL = 5


@dataclass(frozen=True)
class SynthConfig:
    num_participants: int
    num_questions: int
    num_options: int
    priors: PriorSpec
    seed: int
    response_density: float = 1.0

    def __post_init__(self):
        if self.num_participants < 1 or self.num_questions < 1:
            raise ValueError("participant and question counts must be positive")
        if self.num_options < 2:
            raise ValueError(f"num_options must be >= 2, got {self.num_options}")
        if not 0.0 < self.response_density <= 1.0:
            raise ValueError(
                f"response_density must be in (0, 1], got {self.response_density}"
            )


@dataclass(frozen=True)
class SynthTruth:
    abilities: dict     # participant_id -> float
    difficulties: dict  # question_id -> float
    precisions: dict    # question_id -> float

    def raw_score(self, data: ResponseDataset, gold: GoldSet, participant_id: str) -> int:
        return sum(
            1
            for rec in data.records
            if rec.participant_id == participant_id
            and gold.get(rec.question_id) == rec.response
        )


def _rng(seed: int, *key: int) -> np.random.Generator:
    material = [seed & 0xFFFFFFFFFFFFFFFF] + [k & 0xFFFFFFFFFFFFFFFF for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(material)))


def _participant_id(i: int, n: int) -> str:
    return f"p{i:0{len(str(n - 1))}d}"


def _question_id(j: int, n: int) -> str:
    return f"q{j:0{len(str(n - 1))}d}"


def sample(config: SynthConfig):
    """Returns (dataset, gold, truth); byte-identical for identical configs."""
    n_p = config.num_participants
    n_q = config.num_questions
    k = config.num_options
    pr = config.priors

    abilities = {}
    for i in range(n_p):
        g = _rng(config.seed, _KIND_ABILITY, i)
        abilities[_participant_id(i, n_p)] = (
            pr.ability_prior.mean + pr.ability_prior.sd * g.standard_normal()
        )
    difficulties = {}
    for j in range(n_q):
        g = _rng(config.seed, _KIND_DIFFICULTY, j)
        difficulties[_question_id(j, n_q)] = (
            pr.difficulty_prior.mean + pr.difficulty_prior.sd * g.standard_normal()
        )
    precisions = {}
    for j in range(n_q):
        qid = _question_id(j, n_q)
        if pr.discrimination.is_learned:
            g = _rng(config.seed, _KIND_PRECISION, j)
            precisions[qid] = float(
                g.gamma(pr.precision_prior.shape, pr.precision_prior.scale)
            )
        else:
            precisions[qid] = pr.discrimination.tau

    gold_entries = {}
    for j in range(n_q):
        g = _rng(config.seed, _KIND_GOLD, j)
        gold_entries[_question_id(j, n_q)] = int(g.integers(k))

    questions = [QuestionSpec(_question_id(j, n_q), k) for j in range(n_q)]
    participants = [_participant_id(i, n_p) for i in range(n_p)]
    records = []
    for i in range(n_p):
        pid = participants[i]
        a = abilities[pid]
        for j in range(n_q):
            qid = questions[j].question_id
            g = _rng(config.seed, _KIND_CELL, i, j)
            u_include, u_correct, u_guess = g.random(3)
            if u_include >= config.response_density:
                continue
            p_know = std_normal_cdf(math.sqrt(precisions[qid]) * (a - difficulties[qid]))
            if u_correct < p_know:
                r = gold_entries[qid]
            else:
                r = int(u_guess * k)
                if r == k:  # u_guess is in [0, 1); guard anyway
                    r = k - 1
            records.append(ResponseRecord(pid, qid, r))

    data = ResponseDataset(questions=questions, records=records, participants=participants)
    gold = GoldSet(gold_entries)
    truth = SynthTruth(
        abilities=abilities, difficulties=difficulties, precisions=precisions
    )
    return data, gold, truth
