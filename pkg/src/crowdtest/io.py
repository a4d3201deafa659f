"""File formats and ingestion.

Everything is line-oriented UTF-8 text with LF newlines and a mandatory
header row: responses as ``participant_id,question_id,response``, questions
as ``question_id,num_options[,display_text,option_texts...]``, gold as
``question_id,correct_option``.  Response and gold values may be option
indices or option labels; ingestion resolves labels through the question's
declared option texts.  Posteriors round-trip losslessly through JSON
(shortest-round-trip floats, sorted keys).
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .data import (
    GoldSet,
    Posteriors,
    QuestionSpec,
    ResponseDataset,
    ResponseRecord,
    validate,
    CellPosterior,
)
from .prob import Discrete, GammaDist, Gaussian1D

__all__ = [
    "DataFormatError",
    "FileManifest",
    "load_dataset",
    "load_manifest",
    "save_dataset",
    "save_posteriors",
    "load_posteriors",
]


class DataFormatError(ValueError):
    """Parse or cross-reference failure, located by file and line."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class FileManifest:
    responses: Path
    questions: Path
    gold: Optional[Path] = None
    config: Optional[Path] = None
    output: Optional[Path] = None


def _split(line: str) -> list:
    return [f.strip() for f in line.rstrip("\n").split(",")]


def _read_lines(path) -> list:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(path, None, f"cannot read: {exc}") from exc
    return text.splitlines()


def _load_questions(path) -> list:
    lines = _read_lines(path)
    if not lines:
        raise DataFormatError(path, 1, "empty file; header row required")
    header = _split(lines[0])
    if header[:2] != ["question_id", "num_options"]:
        raise DataFormatError(
            path, 1, f"header must start with question_id,num_options; got {lines[0]!r}"
        )
    questions = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = _split(line)
        if len(fields) < 2:
            raise DataFormatError(path, ln, f"expected at least 2 fields, got {len(fields)}")
        qid = fields[0]
        try:
            k = int(fields[1])
        except ValueError:
            raise DataFormatError(path, ln, f"num_options {fields[1]!r} is not an integer")
        display = fields[2] if len(fields) > 2 and fields[2] != "" else None
        options = tuple(fields[3:]) if len(fields) > 3 else None
        if options is not None and len(options) != k:
            raise DataFormatError(
                path, ln, f"{len(options)} option texts for {k} options"
            )
        questions.append(QuestionSpec(qid, k, display, options))
    return questions


def _option_index(value: str, question: QuestionSpec, path, ln: int) -> int:
    if question.option_texts and value in question.option_texts:
        return question.option_texts.index(value)
    try:
        idx = int(value)
    except ValueError:
        raise DataFormatError(
            path, ln,
            f"option {value!r} is neither an index nor a declared option text "
            f"of question {question.question_id}",
        )
    if not 0 <= idx < question.num_options:
        raise DataFormatError(
            path, ln,
            f"option index {idx} outside 0..{question.num_options - 1} "
            f"for question {question.question_id}",
        )
    return idx


def load_dataset(
    responses: Union[str, Path],
    questions: Union[str, Path],
    gold: Optional[Union[str, Path]] = None,
) -> tuple:
    """Parse and cross-validate the three files; returns (dataset, gold)."""
    question_list = _load_questions(questions)
    by_id = {q.question_id: q for q in question_list}

    lines = _read_lines(responses)
    if not lines or _split(lines[0]) != ["participant_id", "question_id", "response"]:
        raise DataFormatError(
            responses, 1, "header must be participant_id,question_id,response"
        )
    records = []
    seen = {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = _split(line)
        if len(fields) != 3:
            raise DataFormatError(responses, ln, f"expected 3 fields, got {len(fields)}")
        pid, qid, resp = fields
        if qid not in by_id:
            raise DataFormatError(responses, ln, f"undeclared question {qid!r}")
        if (pid, qid) in seen:
            raise DataFormatError(
                responses, ln,
                f"duplicate record for ({pid}, {qid}); first at line {seen[(pid, qid)]}",
            )
        seen[(pid, qid)] = ln
        records.append(ResponseRecord(pid, qid, _option_index(resp, by_id[qid], responses, ln)))

    entries = {}
    if gold is not None:
        glines = _read_lines(gold)
        if not glines or _split(glines[0]) != ["question_id", "correct_option"]:
            raise DataFormatError(gold, 1, "header must be question_id,correct_option")
        for ln, line in enumerate(glines[1:], start=2):
            if not line.strip():
                continue
            fields = _split(line)
            if len(fields) != 2:
                raise DataFormatError(gold, ln, f"expected 2 fields, got {len(fields)}")
            qid, value = fields
            if qid not in by_id:
                raise DataFormatError(gold, ln, f"undeclared question {qid!r}")
            if qid in entries:
                raise DataFormatError(gold, ln, f"duplicate gold entry for {qid!r}")
            entries[qid] = _option_index(value, by_id[qid], gold, ln)

    data = ResponseDataset(questions=question_list, records=records)
    gold_set = GoldSet(entries)
    problems = validate(data, gold_set)
    if problems:
        raise DataFormatError(
            responses, None, "; ".join(str(v) for v in problems)
        )
    return data, gold_set


def load_manifest(manifest: FileManifest) -> tuple:
    return load_dataset(manifest.responses, manifest.questions, manifest.gold)


def save_dataset(
    data: ResponseDataset,
    gold: GoldSet,
    responses: Union[str, Path],
    questions: Union[str, Path],
    gold_path: Optional[Union[str, Path]] = None,
):
    for q in data.questions:
        for text in (q.display_text or "",) + (q.option_texts or ()):
            if "," in text or "\n" in text:
                raise ValueError(
                    f"question {q.question_id}: texts may not contain commas "
                    f"or newlines in this format: {text!r}"
                )
    qlines = ["question_id,num_options"]
    if any(q.display_text or q.option_texts for q in data.questions):
        qlines = ["question_id,num_options,display_text,option_texts"]
        for q in data.questions:
            tail = [q.display_text or ""]
            tail += list(q.option_texts or ())
            qlines.append(f"{q.question_id},{q.num_options}," + ",".join(tail))
    else:
        for q in data.questions:
            qlines.append(f"{q.question_id},{q.num_options}")
    Path(questions).write_text("\n".join(qlines) + "\n", encoding="utf-8")

    rlines = ["participant_id,question_id,response"]
    for rec in data.records:
        rlines.append(f"{rec.participant_id},{rec.question_id},{rec.response}")
    Path(responses).write_text("\n".join(rlines) + "\n", encoding="utf-8")

    if gold_path is not None:
        glines = ["question_id,correct_option"]
        for qid, option in sorted(gold.items()):
            glines.append(f"{qid},{option}")
        Path(gold_path).write_text("\n".join(glines) + "\n", encoding="utf-8")


def _gauss_doc(g: Gaussian1D) -> dict:
    return {"mean": g.mean, "variance": g.variance}


def save_posteriors(posteriors: Posteriors, path, include_cells: bool = True):
    """Write all marginal families as a sorted-key JSON document.

    Floats serialize in shortest-round-trip form, so save -> load -> save
    is byte-identical.
    """
    doc = {
        "questions": {
            qid: {
                "answer_dist": [float(p) for p in dist.probs],
                "difficulty": _gauss_doc(posteriors.difficulty[qid]),
                "precision": {
                    "shape": posteriors.precision[qid].shape,
                    "scale": posteriors.precision[qid].scale,
                },
            }
            for qid, dist in posteriors.answer_dist.items()
        },
        "participants": {
            pid: {"ability": _gauss_doc(g)} for pid, g in posteriors.ability.items()
        },
    }
    if include_cells:
        doc["cells"] = [
            {
                "participant": pid,
                "question": qid,
                "p_correct": cell.p_correct,
                "response_dist": [float(p) for p in cell.response_dist.probs],
                "t": _gauss_doc(cell.t),
            }
            for (pid, qid), cell in sorted(posteriors.cell.items())
        ]
    for qid, q in doc["questions"].items():
        total = sum(q["answer_dist"])
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"answer distribution for {qid} sums to {total}, not 1")
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_posteriors(path) -> Posteriors:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    answer = {}
    difficulty = {}
    precision = {}
    for qid, q in doc["questions"].items():
        answer[qid] = Discrete(q["answer_dist"])
        difficulty[qid] = Gaussian1D(**q["difficulty"])
        precision[qid] = GammaDist(**q["precision"])
    ability = {
        pid: Gaussian1D(**p["ability"]) for pid, p in doc["participants"].items()
    }
    cell = {}
    for c in doc.get("cells", []):
        cell[(c["participant"], c["question"])] = CellPosterior(
            p_correct=c["p_correct"],
            response_dist=Discrete(c["response_dist"]),
            t=Gaussian1D(**c["t"]),
        )
    return Posteriors(
        answer_dist=answer,
        ability=ability,
        difficulty=difficulty,
        precision=precision,
        cell=cell,
    )
