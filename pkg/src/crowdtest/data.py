"""Data model for multiple-choice response matrices.

A dataset is a sparse set of (participant, question, response) triples over
declared questions; a gold set is a partial map from question to the known
correct option.  Construction is permissive — referential integrity is
checked by :func:`validate`, which returns diagnostics instead of raising,
and enforced by the graph builder.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .prob import Discrete, GammaDist, Gaussian1D

__all__ = [
    "QuestionSpec",
    "ResponseRecord",
    "ResponseDataset",
    "GoldSet",
    "Discrimination",
    "PriorSpec",
    "ModelVariant",
    "CellPosterior",
    "Posteriors",
    "Violation",
    "validate",
    "default_priors",
]


@dataclass(frozen=True)
class QuestionSpec:
    """One multiple-choice question with options indexed 0..num_options-1."""

    question_id: str
    num_options: int
    display_text: Optional[str] = None
    option_texts: Optional[tuple] = None

    def __post_init__(self):
        if self.option_texts is not None:
            object.__setattr__(self, "option_texts", tuple(self.option_texts))


@dataclass(frozen=True)
class ResponseRecord:
    participant_id: str
    question_id: str
    response: int


class ResponseDataset:
    """Sparse response matrix: declared questions, participants, and records.

    Participants are the union of the explicitly declared ids and the ids
    appearing in records; declared-but-silent participants are legal and
    simply keep their priors.
    """

    def __init__(
        self,
        questions: Iterable[QuestionSpec],
        records: Iterable[ResponseRecord] = (),
        participants: Iterable[str] = (),
    ):
        self.questions = tuple(questions)
        self.records = tuple(records)
        declared = list(participants)
        seen = set(declared)
        for rec in self.records:
            if rec.participant_id not in seen:
                seen.add(rec.participant_id)
                declared.append(rec.participant_id)
        self.participants = tuple(declared)
        self.question_index = {q.question_id: i for i, q in enumerate(self.questions)}
        self.participant_index = {p: i for i, p in enumerate(self.participants)}

    @property
    def question_ids(self) -> tuple:
        return tuple(q.question_id for q in self.questions)

    def question(self, question_id: str) -> QuestionSpec:
        return self.questions[self.question_index[question_id]]

    def num_options(self, question_id: str) -> int:
        return self.question(question_id).num_options

    def records_for_question(self, question_id: str) -> list:
        return [r for r in self.records if r.question_id == question_id]

    def subset_participants(self, keep: Sequence[str]) -> "ResponseDataset":
        """Dataset restricted to the given participants (questions kept)."""
        keep_set = set(keep)
        return ResponseDataset(
            questions=self.questions,
            records=[r for r in self.records if r.participant_id in keep_set],
            participants=[p for p in keep if p in self.participant_index],
        )

    def __repr__(self) -> str:
        return (
            f"ResponseDataset({len(self.participants)} participants, "
            f"{len(self.questions)} questions, {len(self.records)} records)"
        )


class GoldSet:
    """Partial map question_id -> known correct option index."""

    def __init__(self, entries: Optional[Mapping[str, int]] = None):
        self.entries = dict(entries or {})

    def __contains__(self, question_id: str) -> bool:
        return question_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, question_id: str, default=None):
        return self.entries.get(question_id, default)

    def items(self):
        return self.entries.items()

    def restrict(self, question_ids: Iterable[str]) -> "GoldSet":
        keep = set(question_ids)
        return GoldSet({q: v for q, v in self.entries.items() if q in keep})

    def __repr__(self) -> str:
        return f"GoldSet({len(self.entries)} entries)"


@dataclass(frozen=True)
class Discrimination:
    """Per-question precision handling: learned from data or fixed globally."""

    mode: str
    tau: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("learned", "fixed"):
            raise ValueError(f"mode must be 'learned' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed":
            if self.tau is None or not self.tau > 0.0:
                raise ValueError(f"fixed discrimination requires tau > 0, got {self.tau}")
        elif self.tau is not None:
            raise ValueError("learned discrimination takes no tau")

    @classmethod
    def learned(cls) -> "Discrimination":
        return cls(mode="learned")

    @classmethod
    def fixed(cls, tau: float) -> "Discrimination":
        return cls(mode="fixed", tau=float(tau))

    @property
    def is_learned(self) -> bool:
        return self.mode == "learned"


@dataclass(frozen=True)
class PriorSpec:
    ability_prior: Gaussian1D
    difficulty_prior: Gaussian1D
    precision_prior: GammaDist
    discrimination: Discrimination


def default_priors(discrimination: Optional[Discrimination] = None) -> PriorSpec:
    """Unit-scale latent space; precision prior centered at 1 so that the
    learned and fixed(1) modes are comparable."""
    return PriorSpec(
        ability_prior=Gaussian1D(0.0, 1.0),
        difficulty_prior=Gaussian1D(0.0, 1.0),
        precision_prior=GammaDist(shape=2.0, scale=0.5),
        discrimination=discrimination or Discrimination.learned(),
    )


class ModelVariant(str, Enum):
    """Full model, or ablations clamping one latent family to its prior mean."""

    FULL = "full"
    QUESTION_ONLY = "question-only"
    PARTICIPANT_ONLY = "participant-only"


@dataclass(frozen=True)
class CellPosterior:
    """Posterior state of one (participant, question) pair."""

    p_correct: float
    response_dist: Discrete
    t: Gaussian1D


@dataclass
class Posteriors:
    """The six inferred marginal families, keyed by public identifiers."""

    answer_dist: dict          # question_id -> Discrete
    ability: dict              # participant_id -> Gaussian1D
    difficulty: dict           # question_id -> Gaussian1D
    precision: dict            # question_id -> GammaDist
    cell: dict = field(default_factory=dict)  # (participant_id, question_id) -> CellPosterior


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


def validate(data: ResponseDataset, gold: GoldSet) -> list:
    """Referential and range diagnostics; empty list iff everything holds."""
    out = []
    seen_q = set()
    for q in data.questions:
        if q.question_id in seen_q:
            out.append(Violation("question.duplicate", q.question_id, "declared twice"))
        seen_q.add(q.question_id)
        if q.num_options < 2:
            out.append(
                Violation(
                    "question.num_options",
                    q.question_id,
                    f"needs at least 2 options, has {q.num_options}",
                )
            )
        if q.option_texts is not None and len(q.option_texts) != q.num_options:
            out.append(
                Violation(
                    "question.option_texts",
                    q.question_id,
                    f"{len(q.option_texts)} option texts for {q.num_options} options",
                )
            )
    if len(set(data.participants)) != len(data.participants):
        dupes = sorted(
            {p for p in data.participants if data.participants.count(p) > 1}
        )
        for p in dupes:
            out.append(Violation("participant.duplicate", p, "declared twice"))

    seen_cells = set()
    for rec in data.records:
        key = (rec.participant_id, rec.question_id)
        if key in seen_cells:
            out.append(
                Violation(
                    "record.duplicate",
                    f"({rec.participant_id}, {rec.question_id})",
                    "more than one record for this pair",
                )
            )
        seen_cells.add(key)
        if rec.question_id not in data.question_index:
            out.append(
                Violation(
                    "record.unknown_question",
                    f"({rec.participant_id}, {rec.question_id})",
                    "references an undeclared question",
                )
            )
            continue
        n = data.num_options(rec.question_id)
        if not 0 <= rec.response < n:
            out.append(
                Violation(
                    "record.response_range",
                    f"({rec.participant_id}, {rec.question_id})",
                    f"response {rec.response} outside 0..{n - 1}",
                )
            )
    for qid, option in gold.items():
        if qid not in data.question_index:
            out.append(
                Violation("gold.unknown_question", qid, "references an undeclared question")
            )
            continue
        n = data.num_options(qid)
        if not 0 <= option < n:
            out.append(
                Violation(
                    "gold.option_range", qid, f"gold option {option} outside 0..{n - 1}"
                )
            )
    return out
