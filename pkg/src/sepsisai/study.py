"""Study harness: case selection, session randomization, and persistence.

A study runs on four complex cases. Each session assigns one case to a
no-AI slot and the other three to three distinct interface kinds, each drawn
from that kind's two eligible cases. Assignments come from a precomputed
28-session balanced schedule indexed by seed, so per-(case, kind) decision
counts stay near-uniform across many sessions without any shared mutable
state. Sessions and decisions persist to an append-only JSON event log whose
replay reconstructs state byte-identically.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .cohort import Cohort, abnormal_direction, nearest_rank_percentile
from .cues import CueConfig, action_frequencies, consistent_features, unusual_features
from .embedder import EmbedderModel, StateEmbedding, embed
from .errors import (
    AssignmentError,
    InsufficientNeighborsError,
    SequencingError,
    ValidationError,
)
from .interfaces import (
    INTERACTIVE_KINDS,
    InterfaceKind,
    case_state,
    compose_interface,
)
from .neighbors import NeighborIndex, query
from .plans import TreatmentPlan

KINDS = tuple(InterfaceKind)
SCHEDULE_PERIOD = 56          # 7 kinds x 3 per session -> 24 appearances each

# {0, 1, 3} is a perfect difference set mod 7: its translates cover every
# unordered pair of kinds exactly once per 7 sessions, so no kind pair
# monopolizes a contested case.
_TRIPLE_OFFSETS = (0, 1, 3)


class InfluenceTag(str, Enum):
    CONSIDERING_ALTERNATIVES = "ConsideringAlternatives"
    INSPIRATION = "Inspiration"
    SECOND_GUESSING = "SecondGuessing"
    RESOLVING_CONTRADICTIONS = "ResolvingContradictions"
    UNCERTAINTY_CALIBRATION = "UncertaintyCalibration"
    CONFIRMATION = "Confirmation"
    ACCEPTANCE = "Acceptance"
    JUSTIFIED_REJECTION = "JustifiedRejection"
    ADAPTATION = "Adaptation"
    PLAN_PREFERENCE = "PlanPreference"
    ACKNOWLEDGING_EQUIPOISE = "AcknowledgingEquipoise"


@dataclass(frozen=True, order=True)
class CaseRef:
    patient_id: int
    step: int

    def to_dict(self) -> dict:
        return {"patient_id": self.patient_id, "step": self.step}

    @classmethod
    def from_dict(cls, d: dict) -> "CaseRef":
        return cls(int(d["patient_id"]), int(d["step"]))


@dataclass(frozen=True)
class Slot:
    case_ref: CaseRef
    kind: InterfaceKind | None        # None = the no-AI slot

    def to_dict(self) -> dict:
        return {"case_ref": self.case_ref.to_dict(),
                "kind": self.kind.value if self.kind else None}


@dataclass(frozen=True)
class RecordedDecision:
    case_ref: CaseRef
    plan: TreatmentPlan
    mental_demand: int
    confidence: int
    ai_usefulness: int | None = None
    influence_tags: tuple[InfluenceTag, ...] = ()
    free_text: str | None = None

    def to_dict(self) -> dict:
        return {
            "case_ref": self.case_ref.to_dict(),
            "plan": self.plan.to_dict(),
            "ratings": {"mental_demand": self.mental_demand,
                        "confidence": self.confidence,
                        "ai_usefulness": self.ai_usefulness},
            "influence_tags": sorted(t.value for t in self.influence_tags),
            "free_text": self.free_text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecordedDecision":
        ratings = d["ratings"]
        return cls(
            case_ref=CaseRef.from_dict(d["case_ref"]),
            plan=TreatmentPlan.from_dict(d["plan"]),
            mental_demand=ratings["mental_demand"],
            confidence=ratings["confidence"],
            ai_usefulness=ratings.get("ai_usefulness"),
            influence_tags=tuple(InfluenceTag(t) for t in d.get("influence_tags", [])),
            free_text=d.get("free_text"),
        )


@dataclass(frozen=True)
class StudySession:
    session_id: str
    participant_id: str
    assignment: tuple[Slot, ...]
    decisions: tuple[RecordedDecision, ...]
    created_at: float

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_id": self.participant_id,
            "assignment": [s.to_dict() for s in self.assignment],
            "decisions": [d.to_dict() for d in self.decisions],
            "created_at": self.created_at,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "StudySession":
        return cls(
            session_id=d["session_id"],
            participant_id=d["participant_id"],
            assignment=tuple(
                Slot(CaseRef.from_dict(s["case_ref"]),
                     InterfaceKind(s["kind"]) if s["kind"] else None)
                for s in d["assignment"]
            ),
            decisions=tuple(RecordedDecision.from_dict(x) for x in d["decisions"]),
            created_at=d["created_at"],
        )


# ---------------------------------------------------------------------------
# Complex-case selection

@dataclass(frozen=True)
class SelectedCases:
    refs: tuple[CaseRef, ...]
    shortfall: bool


def _kth_neighbor_distances(index: NeighborIndex, k: int) -> np.ndarray:
    """Distance to each entry's k-th nearest neighbor (own patient excluded)."""
    emb = index.embeddings
    n = len(index)
    norms = (emb ** 2).sum(axis=1)
    out = np.empty(n)
    chunk = 512
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = norms[start:stop, None] + norms[None, :] - 2.0 * (emb[start:stop] @ emb.T)
        np.maximum(d2, 0.0, out=d2)
        same = index.patient_ids[start:stop, None] == index.patient_ids[None, :]
        d2[same] = np.inf
        for row in range(stop - start):
            finite = np.isfinite(d2[row])
            m = int(finite.sum())
            if m == 0:
                out[start + row] = 0.0
                continue
            kk = min(k, m) - 1
            out[start + row] = np.sqrt(np.partition(d2[row][finite], kk)[kk])
    return out


def _abnormal_system_counts(cohort: Cohort) -> dict[tuple[int, int], int]:
    """Organ systems with at least one out-of-range observed value, per state."""
    schema = cohort.schema
    systems = sorted({f.organ_system for f in schema.features}, key=lambda s: s.value)
    sys_pos = {s: i for i, s in enumerate(systems)}
    has_range = np.array([f.normal_range is not None for f in schema.features])
    lo = np.array([f.normal_range[0] if f.normal_range else 0.0 for f in schema.features])
    hi = np.array([f.normal_range[1] if f.normal_range else 0.0 for f in schema.features])
    feat_sys = np.array([sys_pos[f.organ_system] for f in schema.features])
    counts: dict[tuple[int, int], int] = {}
    for p in cohort.patients:
        values = p.values_matrix()
        missing = p.missing_matrix()
        abnormal = has_range & ~missing & ((values < lo) | (values > hi))
        for step in range(values.shape[0]):
            flagged = np.unique(feat_sys[abnormal[step]])
            counts[(p.patient_id, p.steps[step].index)] = int(flagged.size)
    return counts


def select_complex_cases(eval_cohort: Cohort, index: NeighborIndex,
                         model: EmbedderModel, n: int, cfg: CueConfig
                         ) -> SelectedCases:
    """Pick decision points that are multisystem-abnormal and live in a sparse
    region of the embedding space.

    Candidates need at least 3 organ systems with an out-of-range value at
    the query step and a k-th-neighbor distance above the cohort's 90th
    percentile; the final ranking combines both criteria. At most one case
    per patient is returned; fewer than `n` candidates sets the shortfall
    flag instead of failing.
    """
    if n < 1:
        raise ValueError("n must be positive")
    kth = _kth_neighbor_distances(index, cfg.k)
    threshold = nearest_rank_percentile(kth.tolist(), 0.90)
    systems = _abnormal_system_counts(eval_cohort)

    candidates = []
    for pos in range(len(index)):
        ref = CaseRef(int(index.patient_ids[pos]), int(index.step_indices[pos]))
        n_sys = systems.get((ref.patient_id, ref.step), 0)
        if n_sys >= 3 and kth[pos] > threshold:
            candidates.append((ref, n_sys, float(kth[pos])))

    by_sys = sorted(candidates, key=lambda c: (-c[1], c[0]))
    by_dist = sorted(candidates, key=lambda c: (-c[2], c[0]))
    rank_sys = {c[0]: i for i, c in enumerate(by_sys)}
    rank_dist = {c[0]: i for i, c in enumerate(by_dist)}
    ordered = sorted(candidates, key=lambda c: (rank_sys[c[0]] + rank_dist[c[0]], c[0]))

    picked: list[CaseRef] = []
    seen_patients: set[int] = set()
    for ref, _, _ in ordered:
        if ref.patient_id in seen_patients:
            continue
        picked.append(ref)
        seen_patients.add(ref.patient_id)
        if len(picked) == n:
            break
    return SelectedCases(refs=tuple(picked), shortfall=len(picked) < n)


# ---------------------------------------------------------------------------
# Interface/case eligibility

def _completeness(kind: InterfaceKind, case_ref: CaseRef, eval_cohort: Cohort,
                  index: NeighborIndex, model: EmbedderModel, cfg: CueConfig
                  ) -> tuple[bool, float]:
    """(fully populated?, richness score) for showing `kind` on this case."""
    trajectory = eval_cohort.patient(case_ref.patient_id)
    state = case_state(model, trajectory, case_ref.step)
    neighbors = query(index, embed(model, trajectory, case_ref.step), cfg.k)
    if len(neighbors) == 0:
        return False, 0.0
    try:
        if kind is InterfaceKind.CASE_FEATURES:
            r1 = consistent_features(state, neighbors, cfg)
            r2 = unusual_features(state, neighbors, cfg)
            return (len(r1) >= 1 and len(r2) >= 1), float(len(r1) + len(r2))
        if kind in INTERACTIVE_KINDS:
            freq = action_frequencies(neighbors)
            viable = sum(1 for c in freq.counts if c >= cfg.min_plan_support)
            return viable >= 2, float(viable)
        if kind is InterfaceKind.PRIOR_CLINICIAN_ACTIONS:
            freq = action_frequencies(neighbors)
            return freq.total >= 1, float(freq.total)
        if kind is InterfaceKind.TREATMENT_RECOMMENDATION:
            view = compose_interface(kind, state, neighbors, None, cfg)
            rec = view.cues[-1].payload
            ok = rec.plan is not None
            return ok, float(rec.supporting.get("denominator", 0)) if ok else 0.0
        return True, float(len(neighbors))   # plain risk interfaces
    except InsufficientNeighborsError:
        return False, 0.0


def build_eligibility(case_refs: tuple[CaseRef, ...], eval_cohort: Cohort,
                      index: NeighborIndex, model: EmbedderModel, cfg: CueConfig
                      ) -> dict[InterfaceKind, tuple[CaseRef, CaseRef]]:
    """Map every interface kind to its two most complete cases.

    No unordered case pair is assigned to more than two kinds; this keeps
    every scheduled kind-triple matchable to three distinct cases.
    """
    if len(case_refs) < 2:
        raise AssignmentError("eligibility needs at least 2 cases")
    scored: dict[InterfaceKind, list[CaseRef]] = {}
    for kind in KINDS:
        stats = {ref: _completeness(kind, ref, eval_cohort, index, model, cfg)
                 for ref in case_refs}
        scored[kind] = sorted(
            case_refs,
            key=lambda ref: (-int(stats[ref][0]), -stats[ref][1], ref),
        )

    # Depth-first assignment of one case pair per kind, preferring each
    # kind's most complete cases, under two structural constraints that keep
    # sessions both satisfiable and balanceable: no unordered pair serves
    # more than two kinds, and no case serves more than four kinds.
    max_membership = 4 if len(case_refs) >= 4 else len(KINDS)
    pair_rank: dict[InterfaceKind, list[tuple[CaseRef, CaseRef]]] = {}
    for kind in KINDS:
        ranked = scored[kind]
        order = [(i, j) for j in range(1, len(ranked)) for i in range(j)]
        order.sort(key=lambda ij: (ij[0] + ij[1], ij[1]))
        pair_rank[kind] = [(ranked[i], ranked[j]) for i, j in order]

    pair_use: dict[frozenset, int] = {}
    membership: dict[CaseRef, int] = {ref: 0 for ref in case_refs}
    eligibility: dict[InterfaceKind, tuple[CaseRef, CaseRef]] = {}

    def assign(position: int) -> bool:
        if position == len(KINDS):
            return True
        kind = KINDS[position]
        remaining = len(KINDS) - position
        for a, b in pair_rank[kind]:
            key = frozenset((a, b))
            if pair_use.get(key, 0) >= 2:
                continue
            if membership[a] >= max_membership or membership[b] >= max_membership:
                continue
            pair_use[key] = pair_use.get(key, 0) + 1
            membership[a] += 1
            membership[b] += 1
            capacity = sum(max_membership - m for m in membership.values())
            if capacity >= 2 * (remaining - 1) and assign(position + 1):
                eligibility[kind] = (a, b)
                return True
            pair_use[key] -= 1
            membership[a] -= 1
            membership[b] -= 1
        return False

    if not assign(0):
        raise AssignmentError("could not assign two cases to every kind")
    return eligibility


# ---------------------------------------------------------------------------
# Session randomization

_SCHEDULE_CACHE: dict = {}


def _validate_design(cases: tuple[CaseRef, ...],
                     eligibility: dict[InterfaceKind, tuple[CaseRef, ...]]):
    if len(cases) != 4 or len(set(cases)) != 4:
        raise AssignmentError("a session needs exactly 4 distinct cases")
    if set(eligibility) != set(KINDS):
        raise AssignmentError("eligibility must cover all 7 interface kinds")
    for kind, refs in eligibility.items():
        if len(refs) != 2 or len(set(refs)) != 2:
            raise AssignmentError(f"{kind.value} must map to exactly 2 cases")
        if any(r not in cases for r in refs):
            raise AssignmentError(f"{kind.value} eligibility references an unknown case")


def _build_schedule(cases: tuple[CaseRef, ...],
                    eligibility: dict[InterfaceKind, tuple[CaseRef, CaseRef]]
                    ) -> list[tuple[Slot, ...]]:
    """One balanced period of sessions; a pure function of the design."""
    cell_use = {(kind, ref): 0 for kind in KINDS for ref in eligibility[kind]}
    noai_use = {ref: 0 for ref in cases}
    schedule = []
    for t in range(SCHEDULE_PERIOD):
        kinds = [KINDS[(t + off) % len(KINDS)] for off in _TRIPLE_OFFSETS]
        combos = []
        for i0 in range(2):
            for i1 in range(2):
                for i2 in range(2):
                    choice = (eligibility[kinds[0]][i0], eligibility[kinds[1]][i1],
                              eligibility[kinds[2]][i2])
                    if len(set(choice)) == 3:
                        combos.append(choice)
        if not combos:
            raise AssignmentError(
                f"kinds {[k.value for k in kinds]} cannot be placed on distinct cases"
            )

        def cost(choice):
            leftover = next(r for r in cases if r not in choice)
            cells = [cell_use[(k, r)] for k, r in zip(kinds, choice)]
            # Squared increments keep every cell count as level as possible.
            return (sum((c + 1) ** 2 - c ** 2 for c in cells), max(cells),
                    noai_use[leftover])

        choice = min(enumerate(combos), key=lambda ic: (cost(ic[1]), ic[0]))[1]
        leftover = next(r for r in cases if r not in choice)
        for k, r in zip(kinds, choice):
            cell_use[(k, r)] += 1
        noai_use[leftover] += 1
        kind_by_case = {r: k for k, r in zip(kinds, choice)}
        schedule.append(tuple(Slot(case_ref=r, kind=kind_by_case.get(r)) for r in cases))
    return schedule


def create_session(participant_id: str, cases: tuple[CaseRef, ...],
                   eligibility: dict[InterfaceKind, tuple[CaseRef, CaseRef]],
                   seed: int) -> StudySession:
    """Seeded assignment: 4 slots, exactly one no-AI, 3 distinct kinds, every
    AI slot within eligibility; balanced across sequential seeds."""
    cases = tuple(cases)
    _validate_design(cases, eligibility)
    cache_key = (cases, tuple((k, eligibility[k]) for k in KINDS))
    schedule = _SCHEDULE_CACHE.get(cache_key)
    if schedule is None:
        schedule = _build_schedule(cases, eligibility)
        _SCHEDULE_CACHE[cache_key] = schedule
    slots = schedule[seed % SCHEDULE_PERIOD]
    rotation = (seed // SCHEDULE_PERIOD) % 4
    slots = slots[rotation:] + slots[:rotation]
    return StudySession(
        session_id=secrets.token_hex(8),
        participant_id=participant_id,
        assignment=slots,
        decisions=(),
        created_at=time.time(),
    )


# ---------------------------------------------------------------------------
# Decision recording

def _validate_decision(session: StudySession, decision: RecordedDecision):
    for label, rating in (("mental_demand", decision.mental_demand),
                          ("confidence", decision.confidence)):
        if not isinstance(rating, int) or not 1 <= rating <= 10:
            raise ValidationError(f"{label} must be an integer in 1..10")
    if len(session.decisions) >= len(session.assignment):
        raise SequencingError("session already has a decision for every slot")
    slot = session.assignment[len(session.decisions)]
    if decision.case_ref != slot.case_ref:
        raise SequencingError(
            f"expected a decision for case {slot.case_ref}, got {decision.case_ref}"
        )
    if slot.kind is None:
        if decision.ai_usefulness is not None:
            raise ValidationError("ai_usefulness must be absent on the no-AI slot")
    else:
        if decision.ai_usefulness is None:
            raise ValidationError("ai_usefulness is required when AI was shown")
        if not isinstance(decision.ai_usefulness, int) or not 1 <= decision.ai_usefulness <= 10:
            raise ValidationError("ai_usefulness must be an integer in 1..10")


def record_decision(session: StudySession, decision: RecordedDecision) -> StudySession:
    """Validate and append one decision for the session's current slot."""
    _validate_decision(session, decision)
    return replace(session, decisions=session.decisions + (decision,))


# ---------------------------------------------------------------------------
# Append-only event log and session store

def _canonical(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def replay_events(path: Path) -> tuple[dict[str, StudySession], dict[str, set[str]]]:
    """Rebuild all session state from the event log."""
    sessions: dict[str, StudySession] = {}
    seen_keys: dict[str, set[str]] = {}
    if not path.exists():
        return sessions, seen_keys
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            event = json.loads(line)
            if event["event"] == "session_created":
                session = StudySession.from_dict(event["session"])
                sessions[session.session_id] = session
                seen_keys[session.session_id] = set()
            elif event["event"] == "decision_recorded":
                sid = event["session_id"]
                key = event["idempotency_key"]
                if key in seen_keys.get(sid, set()):
                    continue
                seen_keys.setdefault(sid, set()).add(key)
                sessions[sid] = record_decision(
                    sessions[sid], RecordedDecision.from_dict(event["decision"]))
    return sessions, seen_keys


class SessionStore:
    """In-memory sessions with single-writer-per-session discipline, backed by
    the append-only event log. Restarting replays the log."""

    def __init__(self, log_path: Path):
        self.log_path = Path(log_path)
        self.sessions, self._seen_keys = replay_events(self.log_path)
        self._store_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {
            sid: threading.Lock() for sid in self.sessions
        }

    def _append(self, event: dict):
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(_canonical(event) + "\n")

    def add_session(self, session: StudySession) -> StudySession:
        with self._store_lock:
            self.sessions[session.session_id] = session
            self._seen_keys[session.session_id] = set()
            self._session_locks[session.session_id] = threading.Lock()
            self._append({"event": "session_created", "session": session.to_dict()})
        return session

    def get(self, session_id: str) -> StudySession:
        session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def record(self, session_id: str, decision: RecordedDecision,
               idempotency_key: str) -> StudySession:
        """Append a decision; retries with the same key return unchanged state."""
        lock = self._session_locks.get(session_id)
        if lock is None:
            raise KeyError(session_id)
        with lock:
            if idempotency_key in self._seen_keys[session_id]:
                return self.sessions[session_id]
            updated = record_decision(self.sessions[session_id], decision)
            self._seen_keys[session_id].add(idempotency_key)
            self.sessions[session_id] = updated
            self._append({"event": "decision_recorded", "session_id": session_id,
                          "idempotency_key": idempotency_key,
                          "decision": decision.to_dict()})
        return updated
