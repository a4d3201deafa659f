"""HTTP facade for live adaptive test sessions.

Per-session state is an append-only JSONL event log (Created,
QuestionOffered, ResponseSubmitted, EstimateComputed) under the data
directory; every event is flushed to disk before the reply is sent, and a
session can always be reconstructed by replaying its log (the Created
event snapshots the bank, so later bank edits never corrupt a replay).
Per-session operations serialize behind a lock; distinct sessions proceed
in parallel.
"""

import json
import os
import threading
import time
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import adaptive
from .data import (
    Discrimination,
    GoldSet,
    PriorSpec,
    QuestionSpec,
    ResponseDataset,
    ResponseRecord,
    default_priors,
    validate,
)
from .ep import EpConfig
from .prob import GammaDist, Gaussian1D

__all__ = ["create_app"]

API = "/api/v1"


def _priors_doc(priors: PriorSpec) -> dict:
    return {
        "ability": [priors.ability_prior.mean, priors.ability_prior.variance],
        "difficulty": [priors.difficulty_prior.mean, priors.difficulty_prior.variance],
        "precision": [priors.precision_prior.shape, priors.precision_prior.scale],
        "discrimination": "learned"
        if priors.discrimination.is_learned
        else f"fixed:{priors.discrimination.tau}",
    }


def _priors_from_doc(doc: dict) -> PriorSpec:
    disc = doc["discrimination"]
    if disc == "learned":
        discrimination = Discrimination.learned()
    else:
        discrimination = Discrimination.fixed(float(disc.split(":", 1)[1]))
    return PriorSpec(
        ability_prior=Gaussian1D(*doc["ability"]),
        difficulty_prior=Gaussian1D(*doc["difficulty"]),
        precision_prior=GammaDist(*doc["precision"]),
        discrimination=discrimination,
    )


class BankError(ValueError):
    pass


def _parse_bank(doc: dict):
    """Validate a bank document into (dataset, gold); gold must be total."""
    if not isinstance(doc, dict) or "questions" not in doc:
        raise BankError("bank document needs a 'questions' list")
    questions = []
    for q in doc["questions"]:
        try:
            questions.append(
                QuestionSpec(
                    question_id=str(q["id"]),
                    num_options=int(q["num_options"]),
                    display_text=q.get("display_text"),
                    option_texts=tuple(q["options"]) if q.get("options") else None,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BankError(f"malformed question entry {q!r}: {exc}") from exc
    records = [
        ResponseRecord(str(p), str(q), int(r)) for p, q, r in doc.get("responses", [])
    ]
    data = ResponseDataset(questions=questions, records=records)
    gold = GoldSet({str(k): int(v) for k, v in doc.get("gold", {}).items()})
    problems = validate(data, gold)
    if problems:
        raise BankError("; ".join(str(v) for v in problems))
    missing = [q.question_id for q in questions if q.question_id not in gold]
    if missing:
        raise BankError(f"bank is missing gold answers for: {', '.join(missing)}")
    return data, gold


def _question_payload(data: ResponseDataset, question_id: str) -> dict:
    q = data.question(question_id)
    return {
        "question_id": q.question_id,
        "num_options": q.num_options,
        "display_text": q.display_text,
        "options": list(q.option_texts) if q.option_texts else None,
    }


class _LiveSession:
    def __init__(self, session_id: str, bank_doc: dict, state, log_path: Path):
        self.session_id = session_id
        self.bank_doc = bank_doc
        self.state = state
        self.log_path = log_path
        self.lock = threading.Lock()
        self.seq = 0
        self.offered: Optional[dict] = None
        self.trace = [
            {"mean": state.ability_posterior.mean, "variance": state.ability_posterior.variance}
        ]

    def append_event(self, kind: str, payload: dict):
        event = {
            "session_id": self.session_id,
            "seq": self.seq,
            "kind": kind,
            "payload": payload,
            "ts": time.time(),
        }
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.seq += 1

    def done(self) -> bool:
        return len(self.state.asked) >= self.state.budget or not self.state.unasked_ids


def create_app(
    data_dir: Path,
    priors: Optional[PriorSpec] = None,
    ep_config: Optional[EpConfig] = None,
    static_dir: Optional[Path] = None,
) -> FastAPI:
    data_dir = Path(data_dir)
    banks_dir = data_dir / "banks"
    sessions_dir = data_dir / "sessions"
    banks_dir.mkdir(parents=True, exist_ok=True)
    sessions_dir.mkdir(parents=True, exist_ok=True)
    service_priors = priors or default_priors(Discrimination.fixed(1.0))
    service_ep = ep_config or EpConfig()

    app = FastAPI(title="crowdtest session service")
    registry: dict = {}
    registry_lock = threading.Lock()
    calibration_cache: dict = {}

    def _bank_path(bank_id: str) -> Path:
        safe = "".join(c for c in bank_id if c.isalnum() or c in "-_")
        if safe != bank_id or not bank_id:
            raise BankError(f"bank id must be alphanumeric/-/_, got {bank_id!r}")
        return banks_dir / f"{bank_id}.json"

    def _load_bank_doc(bank_id: str) -> Optional[dict]:
        path = _bank_path(bank_id)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _calibration(bank_key: str, data, gold, bank_priors):
        if bank_key in calibration_cache:
            return calibration_cache[bank_key]
        if data.records:
            table = adaptive.calibrate(data, gold, bank_priors, service_ep)
        else:
            # cold bank: clamp to the prior means
            table = adaptive.CalibrationTable(
                difficulty_mean={
                    q.question_id: bank_priors.difficulty_prior.mean
                    for q in data.questions
                },
                precision_mean={
                    q.question_id: bank_priors.precision_prior.mean
                    if bank_priors.discrimination.is_learned
                    else bank_priors.discrimination.tau
                    for q in data.questions
                },
            )
        calibration_cache[bank_key] = table
        return table

    def _build_session(session_id: str, created_payload: dict) -> _LiveSession:
        bank_doc = created_payload["bank"]
        data, gold = _parse_bank(bank_doc)
        bank_priors = _priors_from_doc(created_payload["priors"])
        cal = adaptive.CalibrationTable(
            difficulty_mean=dict(created_payload["calibration"]["difficulty_mean"]),
            precision_mean=dict(created_payload["calibration"]["precision_mean"]),
        )
        state = adaptive.new_session(
            participant_id=created_payload["participant_id"],
            bank=data,
            gold=gold,
            priors=bank_priors,
            calibration=cal,
            budget=int(created_payload["budget"]),
            ep_config=service_ep,
        )
        return _LiveSession(session_id, bank_doc, state, sessions_dir / f"{session_id}.jsonl")

    def _replay_session(session_id: str) -> Optional[_LiveSession]:
        path = sessions_dir / f"{session_id}.jsonl"
        if not path.exists():
            return None
        live = None
        for line in path.read_text(encoding="utf-8").splitlines():
            event = json.loads(line)
            kind = event["kind"]
            if kind == "Created":
                live = _build_session(session_id, event["payload"])
            elif kind == "QuestionOffered" and live is not None:
                live.offered = event["payload"]
            elif kind == "ResponseSubmitted" and live is not None:
                live.state = adaptive.submit_response(
                    live.state,
                    event["payload"]["question_id"],
                    int(event["payload"]["response"]),
                )
                live.trace.append(
                    {
                        "mean": live.state.ability_posterior.mean,
                        "variance": live.state.ability_posterior.variance,
                    }
                )
                live.offered = None
            if live is not None:
                live.seq = event["seq"] + 1
        return live

    def _get_session(session_id: str) -> Optional[_LiveSession]:
        with registry_lock:
            live = registry.get(session_id)
        if live is not None:
            return live
        live = _replay_session(session_id)
        if live is None:
            return None
        with registry_lock:
            return registry.setdefault(session_id, live)

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get(API + "/banks")
    def list_banks():
        banks = []
        for path in sorted(banks_dir.glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            banks.append(
                {
                    "bank_id": path.stem,
                    "questions": len(doc.get("questions", [])),
                    "responses": len(doc.get("responses", [])),
                }
            )
        return {"banks": banks}

    @app.put(API + "/banks/{bank_id}")
    def put_bank(bank_id: str, doc: dict):
        try:
            _parse_bank(doc)
            path = _bank_path(bank_id)
        except BankError as exc:
            return _error(400, str(exc))
        existed = path.exists()
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        calibration_cache.pop(bank_id, None)
        return JSONResponse(
            status_code=200 if existed else 201,
            content={"bank_id": bank_id, "replaced": existed},
        )

    @app.post(API + "/sessions", status_code=201)
    def create_session(body: dict):
        bank_doc = body.get("bank")
        bank_key = None
        if bank_doc is None:
            bank_id = body.get("bank_id")
            if not bank_id:
                return _error(400, "need 'bank_id' or an inline 'bank'")
            try:
                bank_doc = _load_bank_doc(bank_id)
            except BankError as exc:
                return _error(400, str(exc))
            if bank_doc is None:
                return _error(404, f"unknown bank {bank_id!r}")
            bank_key = bank_id
        try:
            data, gold = _parse_bank(bank_doc)
        except BankError as exc:
            return _error(400, str(exc))
        budget = int(body.get("budget") or min(5, len(data.questions)))
        if not 1 <= budget <= len(data.questions):
            return _error(400, f"budget must be in 1..{len(data.questions)}, got {budget}")
        participant_id = str(body.get("participant_id") or "live")
        if bank_key is None:
            bank_key = "inline-" + uuid.uuid4().hex
        table = _calibration(bank_key, data, gold, service_priors)

        session_id = uuid.uuid4().hex
        created = {
            "participant_id": participant_id,
            "bank": bank_doc,
            "priors": _priors_doc(service_priors),
            "calibration": {
                "difficulty_mean": table.difficulty_mean,
                "precision_mean": table.precision_mean,
            },
            "budget": budget,
        }
        live = _build_session(session_id, created)
        live.append_event("Created", created)
        with registry_lock:
            registry[session_id] = live
        return {
            "session_id": session_id,
            "budget": budget,
            "asked_count": 0,
            "ability_mean": live.state.ability_posterior.mean,
            "ability_variance": live.state.ability_posterior.variance,
        }

    @app.get(API + "/sessions/{session_id}/next")
    def get_next(session_id: str):
        live = _get_session(session_id)
        if live is None:
            return _error(404, f"unknown session {session_id!r}")
        with live.lock:
            if live.offered is not None:
                return {"done": False, **live.offered}
            if live.done():
                return {
                    "done": True,
                    "asked_count": len(live.state.asked),
                    "budget": live.state.budget,
                }
            try:
                qid = adaptive.next_question(live.state)
            except adaptive.SessionExhausted:
                return {
                    "done": True,
                    "asked_count": len(live.state.asked),
                    "budget": live.state.budget,
                }
            score = adaptive.score_question(live.state, qid)
            offered = {
                "question": _question_payload(live.state.bank, qid),
                "expected_entropy_reduction": score.expected_entropy_reduction,
                "asked_count": len(live.state.asked),
                "budget": live.state.budget,
            }
            live.append_event("QuestionOffered", offered)
            live.offered = offered
            return {"done": False, **offered}

    @app.post(API + "/sessions/{session_id}/responses")
    def submit(session_id: str, body: dict):
        live = _get_session(session_id)
        if live is None:
            return _error(404, f"unknown session {session_id!r}")
        with live.lock:
            question_id = body.get("question_id")
            if live.offered is None or live.offered["question"]["question_id"] != question_id:
                if question_id in live.state.asked_ids:
                    return _error(409, f"question {question_id!r} already answered")
                return _error(409, f"question {question_id!r} is not the offered question")
            try:
                response = int(body.get("response"))
            except (TypeError, ValueError):
                return _error(400, f"response must be an integer, got {body.get('response')!r}")
            k = live.state.bank.num_options(question_id)
            if not 0 <= response < k:
                return _error(400, f"response {response} outside 0..{k - 1}")
            live.append_event(
                "ResponseSubmitted", {"question_id": question_id, "response": response}
            )
            live.state = adaptive.submit_response(live.state, question_id, response)
            live.offered = None
            live.trace.append(
                {
                    "mean": live.state.ability_posterior.mean,
                    "variance": live.state.ability_posterior.variance,
                }
            )
            estimate = adaptive.estimate_raw_score(live.state)
            live.append_event("EstimateComputed", {"estimated_raw_score": estimate})
            return {
                "ability_mean": live.state.ability_posterior.mean,
                "ability_variance": live.state.ability_posterior.variance,
                "asked_count": len(live.state.asked),
                "budget": live.state.budget,
                "estimated_raw_score": estimate,
                "done": live.done(),
            }

    @app.get(API + "/sessions/{session_id}/report")
    def get_report(session_id: str):
        live = _get_session(session_id)
        if live is None:
            return _error(404, f"unknown session {session_id!r}")
        with live.lock:
            asked = [
                {
                    "question_id": qid,
                    "response": r,
                    "correct": live.state.gold.get(qid) == r,
                }
                for qid, r in live.state.asked
            ]
            return {
                "session_id": session_id,
                "participant_id": live.state.participant_id,
                "asked": asked,
                "asked_count": len(asked),
                "budget": live.state.budget,
                "trace": list(live.trace),
                "estimated_raw_score": adaptive.estimate_raw_score(live.state),
                "done": live.done(),
            }

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
