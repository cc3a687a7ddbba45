"""FastAPI application serving cases, interfaces, and study sessions."""

from __future__ import annotations

from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.staticfiles import StaticFiles

from ..bundle import EVENTS_FILE, StudyBundle
from ..cues import CueConfig
from ..errors import (
    AssignmentError,
    InsufficientNeighborsError,
    SequencingError,
    ValidationError,
)
from ..interfaces import INTERACTIVE_KINDS, InterfaceKind
from ..plans import TreatmentPlan
from ..study import (
    CaseRef,
    RecordedDecision,
    SessionStore,
    InfluenceTag,
    create_session,
)
from .schemas import CaseSummary, DecisionBody, PlanBody, SessionCreateBody


def _parse_kind(kind: str) -> InterfaceKind:
    try:
        return InterfaceKind(kind)
    except ValueError:
        raise HTTPException(status_code=404, detail=f"unknown interface kind {kind!r}")


def create_app(data_dir: Path | str, api_token: str | None = None,
               cue_config: CueConfig | None = None,
               static_dir: Path | str | None = None) -> FastAPI:
    data_dir = Path(data_dir)
    bundle = StudyBundle.load(data_dir, cue_config)
    store = SessionStore(data_dir / EVENTS_FILE)
    app = FastAPI(title="sepsisai study service")
    app.state.bundle = bundle
    app.state.store = store

    def require_token(request: Request):
        if api_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {api_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    auth = Depends(require_token)

    @app.get("/api/cases", response_model=list[CaseSummary], dependencies=[auth])
    def list_cases():
        return [CaseSummary(id=c.ref.patient_id, pseudonym=c.pseudonym, step=c.ref.step)
                for c in bundle.cases]

    @app.get("/api/cases/{patient_id}", dependencies=[auth])
    def case_detail(patient_id: int):
        try:
            return bundle.case_detail(patient_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown case {patient_id}")

    @app.get("/api/cases/{patient_id}/interface/{kind}", dependencies=[auth])
    def interface_view(patient_id: int, kind: str):
        interface_kind = _parse_kind(kind)
        if interface_kind in INTERACTIVE_KINDS:
            raise HTTPException(
                status_code=400,
                detail=f"{interface_kind.value} is interactive; POST a plan to "
                       f"/api/cases/{patient_id}/interface/{kind}/query",
            )
        return _compose(patient_id, interface_kind, None)

    @app.post("/api/cases/{patient_id}/interface/{kind}/query", dependencies=[auth])
    def interface_query(patient_id: int, kind: str, plan: PlanBody):
        interface_kind = _parse_kind(kind)
        if interface_kind not in INTERACTIVE_KINDS:
            raise HTTPException(
                status_code=400,
                detail=f"{interface_kind.value} is not interactive; GET it instead",
            )
        selected = TreatmentPlan(plan.volume, plan.vasopressor)
        return _compose(patient_id, interface_kind, selected)

    def _compose(patient_id: int, kind: InterfaceKind, plan: TreatmentPlan | None):
        try:
            return bundle.compose(patient_id, kind, plan).to_dict()
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown case {patient_id}")
        except InsufficientNeighborsError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/api/sessions", dependencies=[auth])
    def new_session(body: SessionCreateBody):
        if len(bundle.cases) != 4:
            raise HTTPException(status_code=409,
                                detail="study bundle does not hold exactly 4 cases")
        try:
            session = create_session(
                participant_id=body.participant_id,
                cases=tuple(c.ref for c in bundle.cases),
                eligibility=bundle.eligibility,
                seed=body.seed,
            )
        except AssignmentError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        store.add_session(session)
        return session.to_dict()

    @app.get("/api/sessions/{session_id}", dependencies=[auth])
    def get_session(session_id: str):
        try:
            return store.get(session_id).to_dict()
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.post("/api/sessions/{session_id}/decisions", dependencies=[auth])
    def post_decision(session_id: str, body: DecisionBody):
        decision = RecordedDecision(
            case_ref=CaseRef(body.case_ref.patient_id, body.case_ref.step),
            plan=TreatmentPlan(body.plan.volume, body.plan.vasopressor),
            mental_demand=body.ratings.mental_demand,
            confidence=body.ratings.confidence,
            ai_usefulness=body.ratings.ai_usefulness,
            influence_tags=tuple(InfluenceTag(t) for t in body.influence_tags),
            free_text=body.free_text,
        )
        try:
            session = store.record(session_id, decision, body.idempotency_key)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        except SequencingError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return session.to_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
