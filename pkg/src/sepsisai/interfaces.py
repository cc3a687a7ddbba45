"""The seven decision-support interfaces, each a fixed collection of cues.

Composition table (cue kinds each interface exposes):

* CaseFeatures: R1, R2
* TreatmentRisk / MortalityRisk: R3 (pressor-after-12h / mortality)
* InteractiveTreatmentRisk / InteractiveMortalityRisk: R7, R5, R3 conditional
  on the selected plan, R4 for the selected plan, plus R8 only when the
  selected plan's risk is significantly lower than the alternatives'
* PriorClinicianActions: R7, R5, R6, R8 (most-frequent basis)
* TreatmentRecommendation: R7, R8 (best-risk basis)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .cohort import PatientTrajectory
from .cues import (
    CaseState,
    CueConfig,
    CueKind,
    CueProvenance,
    OutcomeKind,
    ReasoningCue,
    RecommendationBasis,
    action_frequencies,
    conditional_risk,
    consensus_action,
    consistent_features,
    plan_conditional_risk,
    recommend_plan,
    risk_score,
    unusual_features,
)
from .embedder import EmbedderModel
from .neighbors import NeighborSet
from .plans import TreatmentPlan


class InterfaceKind(str, Enum):
    CASE_FEATURES = "CaseFeatures"
    TREATMENT_RISK = "TreatmentRisk"
    MORTALITY_RISK = "MortalityRisk"
    INTERACTIVE_TREATMENT_RISK = "InteractiveTreatmentRisk"
    INTERACTIVE_MORTALITY_RISK = "InteractiveMortalityRisk"
    PRIOR_CLINICIAN_ACTIONS = "PriorClinicianActions"
    TREATMENT_RECOMMENDATION = "TreatmentRecommendation"


INTERACTIVE_KINDS = frozenset({
    InterfaceKind.INTERACTIVE_TREATMENT_RISK,
    InterfaceKind.INTERACTIVE_MORTALITY_RISK,
})

# Outcome each risk-bearing interface predicts. The recommendation interface
# ranks plans by in-admission mortality.
_OUTCOME_FOR = {
    InterfaceKind.TREATMENT_RISK: OutcomeKind.PRESSOR_AFTER_12H,
    InterfaceKind.MORTALITY_RISK: OutcomeKind.MORTALITY,
    InterfaceKind.INTERACTIVE_TREATMENT_RISK: OutcomeKind.PRESSOR_AFTER_12H,
    InterfaceKind.INTERACTIVE_MORTALITY_RISK: OutcomeKind.MORTALITY,
    InterfaceKind.TREATMENT_RECOMMENDATION: OutcomeKind.MORTALITY,
}

# The exact cue-kind sets of the composition table. Interactive kinds add R8
# on top of their base set only when the significance condition holds.
EXPECTED_CUE_KINDS: dict[InterfaceKind, frozenset[CueKind]] = {
    InterfaceKind.CASE_FEATURES: frozenset({CueKind.R1, CueKind.R2}),
    InterfaceKind.TREATMENT_RISK: frozenset({CueKind.R3}),
    InterfaceKind.MORTALITY_RISK: frozenset({CueKind.R3}),
    InterfaceKind.INTERACTIVE_TREATMENT_RISK: frozenset(
        {CueKind.R7, CueKind.R5, CueKind.R3, CueKind.R4}),
    InterfaceKind.INTERACTIVE_MORTALITY_RISK: frozenset(
        {CueKind.R7, CueKind.R5, CueKind.R3, CueKind.R4}),
    InterfaceKind.PRIOR_CLINICIAN_ACTIONS: frozenset(
        {CueKind.R7, CueKind.R5, CueKind.R6, CueKind.R8}),
    InterfaceKind.TREATMENT_RECOMMENDATION: frozenset({CueKind.R7, CueKind.R8}),
}


@dataclass(frozen=True)
class InterfaceView:
    kind: InterfaceKind
    case_ref: tuple[int, int]               # (patient_id, step)
    cues: tuple[ReasoningCue, ...]
    interactive: bool
    selected_plan: TreatmentPlan | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "case_ref": {"patient_id": self.case_ref[0], "step": self.case_ref[1]},
            "interactive": self.interactive,
            "selected_plan": self.selected_plan.to_dict() if self.selected_plan else None,
            "cues": [c.to_dict() for c in self.cues],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def case_state(model: EmbedderModel, trajectory: PatientTrajectory, step: int) -> CaseState:
    """Standardized + raw view of one (patient, step) for cue computation."""
    if not 0 <= step < len(trajectory.steps):
        raise ValueError(f"step {step} out of range")
    ts = trajectory.steps[step]
    return CaseState(
        patient_id=trajectory.patient_id,
        step_index=ts.index,
        values_std=model.standardize(ts.values, ts.missing),
        missing=ts.missing.copy(),
        values_raw=ts.values.copy(),
    )


def compose_interface(kind: InterfaceKind, case: CaseState, neighbors: NeighborSet,
                      selected_plan: TreatmentPlan | None, cfg: CueConfig
                      ) -> InterfaceView:
    """Build one interface's cue collection for a case.

    Interactive kinds require a selected plan; insufficient-neighbor errors
    from the underlying cues propagate unchanged.
    """
    interactive = kind in INTERACTIVE_KINDS
    if interactive and selected_plan is None:
        raise ValueError(f"{kind.value} requires a selected treatment plan")
    if not interactive:
        selected_plan = None
    prov = CueProvenance(neighbor_count=len(neighbors), query_step=case.step_index)

    def cue(cue_kind: CueKind, payload) -> ReasoningCue:
        return ReasoningCue(kind=cue_kind, payload=payload, provenance=prov)

    cues: list[ReasoningCue] = []
    if kind is InterfaceKind.CASE_FEATURES:
        cues.append(cue(CueKind.R1, consistent_features(case, neighbors, cfg)))
        cues.append(cue(CueKind.R2, unusual_features(case, neighbors, cfg)))
    elif kind in (InterfaceKind.TREATMENT_RISK, InterfaceKind.MORTALITY_RISK):
        cues.append(cue(CueKind.R3, risk_score(neighbors, _OUTCOME_FOR[kind], cfg)))
    elif interactive:
        outcome = _OUTCOME_FOR[kind]
        freq = action_frequencies(neighbors)
        diff = plan_conditional_risk(neighbors, selected_plan, outcome, cfg)
        cues.append(cue(CueKind.R7, freq))
        cues.append(cue(CueKind.R5, freq))
        cues.append(cue(CueKind.R3, conditional_risk(neighbors, selected_plan, outcome, cfg)))
        cues.append(cue(CueKind.R4, diff))
        if diff.significant and diff.risk_with_plan < diff.risk_without:
            cues.append(cue(CueKind.R8, recommend_plan(
                neighbors, outcome, freq, cfg, RecommendationBasis.BEST_RISK)))
    elif kind is InterfaceKind.PRIOR_CLINICIAN_ACTIONS:
        freq = action_frequencies(neighbors)
        cues.append(cue(CueKind.R7, freq))
        cues.append(cue(CueKind.R5, freq))
        cues.append(cue(CueKind.R6, consensus_action(freq, cfg)))
        cues.append(cue(CueKind.R8, recommend_plan(
            neighbors, OutcomeKind.MORTALITY, freq, cfg, RecommendationBasis.MOST_FREQUENT)))
    elif kind is InterfaceKind.TREATMENT_RECOMMENDATION:
        freq = action_frequencies(neighbors)
        cues.append(cue(CueKind.R7, freq))
        cues.append(cue(CueKind.R8, recommend_plan(
            neighbors, _OUTCOME_FOR[kind], freq, cfg, RecommendationBasis.BEST_RISK)))
    else:  # pragma: no cover
        raise ValueError(f"unknown interface kind {kind!r}")

    return InterfaceView(
        kind=kind,
        case_ref=(case.patient_id, case.step_index),
        cues=tuple(cues),
        interactive=interactive,
        selected_plan=selected_plan,
    )
