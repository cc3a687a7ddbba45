"""Request/response models for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, field_validator

from ..plans import PressorAction, VolumeAction
from ..study import InfluenceTag


class PlanBody(BaseModel):
    volume: VolumeAction
    vasopressor: PressorAction


class CaseRefBody(BaseModel):
    patient_id: int
    step: int


class SessionCreateBody(BaseModel):
    participant_id: str
    seed: int


class RatingsBody(BaseModel):
    mental_demand: int
    confidence: int
    ai_usefulness: int | None = None


class DecisionBody(BaseModel):
    case_ref: CaseRefBody
    plan: PlanBody
    ratings: RatingsBody
    influence_tags: list[str] = []
    free_text: str | None = None
    idempotency_key: str

    @field_validator("influence_tags")
    @classmethod
    def _known_tags(cls, tags: list[str]) -> list[str]:
        for tag in tags:
            InfluenceTag(tag)   # raises ValueError on unknown tags -> 422
        return tags


class CaseSummary(BaseModel):
    id: int
    pseudonym: str
    step: int
