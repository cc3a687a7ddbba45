"""On-disk study artifacts and the loaded bundle the service runs from.

A data directory holds the pipeline outputs under fixed names:

    cohort.ndjson   raw synthetic cohort (cohort file format)
    train.ndjson    processed training half
    eval.ndjson     processed evaluation half
    model.rcem      embedder checkpoint
    index.rcni      neighbor index (bound to the model checkpoint)
    cases.json      selected study cases, vignettes, and eligibility
    events.ndjson   append-only session/decision event log
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .cohort import Cohort, PatientTrajectory, abnormal_direction, parse_cohort
from .cues import CueConfig
from .embedder import EmbedderModel, embed, load_model
from .errors import ValidationError
from .interfaces import InterfaceKind, InterfaceView, case_state, compose_interface
from .neighbors import NeighborIndex, NeighborSet, load_index, query
from .plans import TreatmentPlan
from .schema import DEFAULT_SCHEMA, FeatureKind
from .study import CaseRef

COHORT_FILE = "cohort.ndjson"
TRAIN_FILE = "train.ndjson"
EVAL_FILE = "eval.ndjson"
MODEL_FILE = "model.rcem"
INDEX_FILE = "index.rcni"
CASES_FILE = "cases.json"
EVENTS_FILE = "events.ndjson"


@dataclass(frozen=True)
class StudyCase:
    ref: CaseRef
    pseudonym: str
    profile: str
    complicating_factors: tuple[str, ...]
    text: str

    def to_dict(self) -> dict:
        return {"patient_id": self.ref.patient_id, "step": self.ref.step,
                "pseudonym": self.pseudonym, "profile": self.profile,
                "complicating_factors": list(self.complicating_factors),
                "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "StudyCase":
        return cls(ref=CaseRef(int(d["patient_id"]), int(d["step"])),
                   pseudonym=d["pseudonym"], profile=d["profile"],
                   complicating_factors=tuple(d["complicating_factors"]),
                   text=d["text"])


def save_cases_artifact(path: Path, cases: list[StudyCase],
                        eligibility: dict[InterfaceKind, tuple[CaseRef, CaseRef]],
                        shortfall: bool):
    payload = {
        "cases": [c.to_dict() for c in cases],
        "eligibility": {kind.value: [ref.to_dict() for ref in refs]
                        for kind, refs in eligibility.items()},
        "shortfall": shortfall,
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=1), encoding="utf-8")


def load_cases_artifact(path: Path) -> tuple[list[StudyCase],
                                             dict[InterfaceKind, tuple[CaseRef, ...]],
                                             bool]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    cases = [StudyCase.from_dict(d) for d in payload["cases"]]
    eligibility = {
        InterfaceKind(kind): tuple(CaseRef.from_dict(r) for r in refs)
        for kind, refs in payload["eligibility"].items()
    }
    return cases, eligibility, payload["shortfall"]


@dataclass
class StudyBundle:
    data_dir: Path
    eval_cohort: Cohort
    model: EmbedderModel
    index: NeighborIndex
    cases: list[StudyCase]
    eligibility: dict[InterfaceKind, tuple[CaseRef, ...]]
    shortfall: bool
    cue_config: CueConfig

    @classmethod
    def load(cls, data_dir: Path | str, cue_config: CueConfig | None = None
             ) -> "StudyBundle":
        data_dir = Path(data_dir)
        with open(data_dir / EVAL_FILE, encoding="utf-8") as fh:
            eval_cohort = parse_cohort(fh, DEFAULT_SCHEMA, provenance="synthetic")
        model = load_model((data_dir / MODEL_FILE).read_bytes())
        index = load_index((data_dir / INDEX_FILE).read_bytes(), model)
        cases, eligibility, shortfall = load_cases_artifact(data_dir / CASES_FILE)
        return cls(data_dir=data_dir, eval_cohort=eval_cohort, model=model,
                   index=index, cases=cases, eligibility=eligibility,
                   shortfall=shortfall, cue_config=cue_config or CueConfig())

    # -- lookups ---------------------------------------------------------

    def case(self, patient_id: int) -> StudyCase:
        for c in self.cases:
            if c.ref.patient_id == patient_id:
                return c
        raise KeyError(patient_id)

    def trajectory(self, patient_id: int) -> PatientTrajectory:
        return self.eval_cohort.patient(patient_id)

    def neighbors_for(self, ref: CaseRef) -> NeighborSet:
        trajectory = self.trajectory(ref.patient_id)
        return query(self.index, embed(self.model, trajectory, ref.step),
                     self.cue_config.k)

    def compose(self, patient_id: int, kind: InterfaceKind,
                selected_plan: TreatmentPlan | None = None) -> InterfaceView:
        case = self.case(patient_id)
        trajectory = self.trajectory(patient_id)
        state = case_state(self.model, trajectory, case.ref.step)
        neighbors = self.neighbors_for(case.ref)
        return compose_interface(kind, state, neighbors, selected_plan, self.cue_config)

    # -- case payload for the dashboard ----------------------------------

    def case_detail(self, patient_id: int) -> dict:
        """Everything the dashboard shows for one case: schema, per-indicator
        series with precomputed abnormal flags and trends, and the vignette."""
        case = self.case(patient_id)
        trajectory = self.trajectory(patient_id)
        step = case.ref.step
        if not 0 <= step < len(trajectory.steps):
            raise ValidationError(f"case step {step} outside trajectory")
        schema = self.eval_cohort.schema

        indicators = []
        for j, feat in enumerate(schema.features):
            history = []
            observations = []
            for ts in trajectory.steps[:step + 1]:
                value = None if ts.missing[j] else float(ts.values[j])
                point_abnormal = (value is not None
                                  and abnormal_direction(feat, value) is not None)
                history.append({"step": ts.index, "hours": ts.index * 4.0,
                                "value": value, "missing": bool(ts.missing[j]),
                                "abnormal": point_abnormal})
                if value is not None:
                    observations.append(value)
            current = history[-1]["value"]
            if len(observations) >= 2:
                delta = observations[-1] - observations[-2]
                trend = "up" if delta > 0 else ("down" if delta < 0 else "flat")
            else:
                trend = "flat"
            indicators.append({
                "name": feat.name,
                "kind": feat.kind.value,
                "unit": feat.unit,
                "organ_system": feat.organ_system.value,
                "normal_range": list(feat.normal_range) if feat.normal_range else None,
                "current_value": current,
                "abnormal": bool(history[-1]["abnormal"]),
                "trend": trend,
                "history": history,
            })

        return {
            "patient_id": patient_id,
            "step": step,
            "pseudonym": case.pseudonym,
            "profile": case.profile,
            "demographics": {"age_band": trajectory.age_band, "sex": trajectory.sex},
            "vignette": case.text,
            "complicating_factors": list(case.complicating_factors),
            "schema": [
                {"name": f.name, "kind": f.kind.value, "unit": f.unit,
                 "normal_range": list(f.normal_range) if f.normal_range else None,
                 "organ_system": f.organ_system.value}
                for f in schema.features
            ],
            "indicators": indicators,
        }


def is_binary(feature_kind: str) -> bool:
    return feature_kind == FeatureKind.BINARY.value
