"""Trajectory data model, cohort file format, and the cohort pipeline.

A cohort file is one header line ``schema_version=1`` followed by
newline-delimited JSON objects, one per line (UTF-8). Two record shapes:

* data record: keys ``patient_id, step_hours_start, feature, value, missing,
  treatment_volume, treatment_pressor, on_cmo``. ``feature`` may be null for
  treatment-only events. ``treatment_volume`` is signed mL for the event
  (positive = IV fluids, negative = fluid removed by diuresis);
  ``treatment_pressor`` is the number of concurrently running vasopressors.
* patient metadata record: keys ``patient_id, antibiotic_times, culture_times,
  died_in_admission, age_band, sex, history_flags`` (plus ``stay_hours``).

Rows carry raw event times; this module discretizes them into 4-hour steps
(step k covers hours [4k, 4k+4)) using last-value-in-bin for observations,
sum-in-bin for volumes, max-in-bin for pressor counts, and any-in-bin for CMO.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

import numpy as np

from .errors import DuplicateRecordError, ParseError, SchemaError
from .plans import (
    NO_TREATMENT,
    TreatmentPlan,
    VolumeAction,
    classify_pressor,
    classify_volume,
)
from .schema import Feature, FeatureKind, FeatureSchema

STEP_HOURS = 4.0
HEADER = "schema_version=1"

DATA_KEYS = {
    "patient_id", "step_hours_start", "feature", "value", "missing",
    "treatment_volume", "treatment_pressor", "on_cmo",
}
META_KEYS = {
    "patient_id", "antibiotic_times", "culture_times", "died_in_admission",
    "age_band", "sex", "history_flags",
}


@dataclass
class Timestep:
    index: int
    values: np.ndarray          # (n_features,) float64; binary features as 0/1
    missing: np.ndarray         # (n_features,) bool; true = never observed, imputed
    treatments_given: TreatmentPlan
    on_cmo: bool = False


@dataclass
class PatientTrajectory:
    patient_id: int
    age_band: str
    sex: str
    diagnosis_history: frozenset[str]
    steps: tuple[Timestep, ...]
    antibiotic_times: tuple[float, ...]
    culture_times: tuple[float, ...]
    died_in_admission: bool
    stay_hours: float

    def values_matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.steps])

    def missing_matrix(self) -> np.ndarray:
        return np.stack([s.missing for s in self.steps])


@dataclass
class Cohort:
    schema: FeatureSchema
    patients: tuple[PatientTrajectory, ...]
    provenance: str = "synthetic"

    def __post_init__(self):
        ids = [p.patient_id for p in self.patients]
        if len(set(ids)) != len(ids):
            raise ValueError("patient_ids must be unique")
        for p in self.patients:
            for s in p.steps:
                if len(s.values) != len(self.schema):
                    raise ValueError(
                        f"patient {p.patient_id}: step value vector does not match schema"
                    )

    def __len__(self) -> int:
        return len(self.patients)

    def patient(self, patient_id: int) -> PatientTrajectory:
        for p in self.patients:
            if p.patient_id == patient_id:
                return p
        raise KeyError(patient_id)


def abnormal_direction(feature: Feature, value: float) -> str | None:
    """'high' / 'low' when a value sits outside the feature's normal range."""
    if feature.normal_range is None:
        return None
    lo, hi = feature.normal_range
    if value < lo:
        return "low"
    if value > hi:
        return "high"
    return None


# ---------------------------------------------------------------------------
# Parsing

def _require(condition: bool, line_no: int, message: str):
    if not condition:
        raise ParseError(line_no, message)


@dataclass
class _PatientAccumulator:
    meta: dict | None = None
    obs: dict = field(default_factory=dict)           # (time, feat_idx) -> value
    treat: list = field(default_factory=list)         # (time, volume, pressors, cmo)
    max_time: float = 0.0


def parse_cohort(source: IO[str] | Iterable[str], schema: FeatureSchema,
                 provenance: str = "external") -> Cohort:
    """Read the cohort file format and discretize into 4-hour timesteps."""
    acc: dict[int, _PatientAccumulator] = {}
    lines = iter(source)

    first = next(lines, None)
    if first is None or first.strip() != HEADER:
        raise ParseError(1, f"expected header {HEADER!r}")

    for line_no, raw in enumerate(lines, start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        _require(isinstance(rec, dict), line_no, "record must be an object")
        _require(isinstance(rec.get("patient_id"), int), line_no, "patient_id must be an integer")
        pid = rec["patient_id"]
        a = acc.setdefault(pid, _PatientAccumulator())

        if "antibiotic_times" in rec:
            _parse_meta(rec, a, pid, line_no, schema)
        elif "step_hours_start" in rec:
            _parse_data(rec, a, pid, line_no, schema)
        else:
            raise ParseError(line_no, "record is neither a data nor a metadata record")

    patients = []
    for pid in sorted(acc):
        patients.append(_assemble(pid, acc[pid], schema))
    return Cohort(schema=schema, patients=tuple(patients), provenance=provenance)


def _parse_meta(rec: dict, a: _PatientAccumulator, pid: int, line_no: int,
                schema: FeatureSchema):
    missing_keys = META_KEYS - rec.keys()
    _require(not missing_keys, line_no, f"metadata record missing keys {sorted(missing_keys)}")
    if a.meta is not None:
        raise DuplicateRecordError(f"duplicate metadata record for patient {pid}")
    for key in ("antibiotic_times", "culture_times"):
        _require(isinstance(rec[key], list), line_no, f"{key} must be a list")
        _require(all(isinstance(t, (int, float)) and math.isfinite(t) and t >= 0
                     for t in rec[key]), line_no, f"{key} entries must be non-negative numbers")
    _require(isinstance(rec["died_in_admission"], bool), line_no, "died_in_admission must be a bool")
    _require(isinstance(rec["history_flags"], list), line_no, "history_flags must be a list")
    for flag in rec["history_flags"]:
        if not (isinstance(flag, str) and schema.has_feature(flag)):
            raise SchemaError(f"unknown history flag {flag!r} for patient {pid}")
    if "stay_hours" in rec:
        _require(isinstance(rec["stay_hours"], (int, float)) and rec["stay_hours"] > 0,
                 line_no, "stay_hours must be a positive number")
    a.meta = rec


def _parse_data(rec: dict, a: _PatientAccumulator, pid: int, line_no: int,
                schema: FeatureSchema):
    missing_keys = DATA_KEYS - rec.keys()
    _require(not missing_keys, line_no, f"data record missing keys {sorted(missing_keys)}")
    t = rec["step_hours_start"]
    _require(isinstance(t, (int, float)) and math.isfinite(t) and t >= 0,
             line_no, "step_hours_start must be a non-negative number")
    vol = rec["treatment_volume"]
    _require(isinstance(vol, (int, float)) and math.isfinite(vol),
             line_no, "treatment_volume must be a finite number")
    pressors = rec["treatment_pressor"]
    _require(isinstance(pressors, int) and pressors >= 0,
             line_no, "treatment_pressor must be a non-negative integer")
    _require(isinstance(rec["on_cmo"], bool), line_no, "on_cmo must be a bool")

    a.max_time = max(a.max_time, float(t))
    a.treat.append((float(t), float(vol), pressors, rec["on_cmo"]))

    name = rec["feature"]
    if name is None:
        return
    if not (isinstance(name, str) and schema.has_feature(name)):
        raise SchemaError(f"unknown feature {name!r} (patient {pid}, line {line_no})")
    if rec["missing"] is True:
        return
    idx = schema.index_of(name)
    feat = schema.features[idx]
    value = rec["value"]
    if feat.kind is FeatureKind.BINARY:
        if isinstance(value, bool):
            value = float(value)
        if value not in (0.0, 1.0, 0, 1):
            raise SchemaError(f"binary feature {name!r} must be 0/1 (patient {pid})")
    else:
        _require(isinstance(value, (int, float)) and not isinstance(value, bool)
                 and math.isfinite(value), line_no, f"value for {name!r} must be a finite number")
    key = (float(t), idx)
    if key in a.obs:
        raise DuplicateRecordError(
            f"duplicate observation of {name!r} at hour {t} for patient {pid}"
        )
    a.obs[key] = float(value)


def _assemble(pid: int, a: _PatientAccumulator, schema: FeatureSchema) -> PatientTrajectory:
    if a.meta is None:
        raise SchemaError(f"patient {pid} has data records but no metadata record")
    meta = a.meta
    n_feat = len(schema)
    n_steps = int(a.max_time // STEP_HOURS) + 1

    values = np.zeros((n_steps, n_feat))
    missing = np.ones((n_steps, n_feat), dtype=bool)

    # History flags are constant binary features, observed at every step.
    for flag in meta["history_flags"]:
        values[:, schema.index_of(flag)] = 1.0
        missing[:, schema.index_of(flag)] = False
    for f in schema.features:
        if f.name.startswith("history_") and f.name not in meta["history_flags"]:
            missing[:, schema.index_of(f.name)] = False

    # Last observation per (bin, feature), then carry forward across bins.
    per_bin: dict[tuple[int, int], tuple[float, float]] = {}
    for (t, idx), value in a.obs.items():
        k = int(t // STEP_HOURS)
        prev = per_bin.get((k, idx))
        if prev is None or t >= prev[0]:
            per_bin[(k, idx)] = (t, value)
    for k in range(n_steps):
        if k > 0:
            carried = ~missing[k - 1]
            values[k, carried] = values[k - 1, carried]
            missing[k, carried] = False
        for idx in range(n_feat):
            hit = per_bin.get((k, idx))
            if hit is not None:
                values[k, idx] = hit[1]
                missing[k, idx] = False

    fluid = np.zeros(n_steps)
    diuretic = np.zeros(n_steps)
    pressors = np.zeros(n_steps, dtype=int)
    cmo = np.zeros(n_steps, dtype=bool)
    for t, vol, n_pressors, on_cmo in a.treat:
        k = int(t // STEP_HOURS)
        if vol >= 0:
            fluid[k] += vol
        else:
            diuretic[k] += -vol
        pressors[k] = max(pressors[k], n_pressors)
        cmo[k] = cmo[k] or on_cmo

    steps = tuple(
        Timestep(
            index=k,
            values=values[k].copy(),
            missing=missing[k].copy(),
            treatments_given=TreatmentPlan(
                classify_volume(fluid[k], diuretic[k]), classify_pressor(int(pressors[k]))
            ),
            on_cmo=bool(cmo[k]),
        )
        for k in range(n_steps)
    )
    stay_hours = float(meta.get("stay_hours", a.max_time))
    return PatientTrajectory(
        patient_id=pid,
        age_band=str(meta["age_band"]),
        sex=str(meta["sex"]),
        diagnosis_history=frozenset(meta["history_flags"]),
        steps=steps,
        antibiotic_times=tuple(float(t) for t in meta["antibiotic_times"]),
        culture_times=tuple(float(t) for t in meta["culture_times"]),
        died_in_admission=bool(meta["died_in_admission"]),
        stay_hours=stay_hours,
    )


# ---------------------------------------------------------------------------
# Writing

_VOLUME_ML = {
    VolumeAction.NO_VOLUME: 0.0,
    VolumeAction.LOW_FLUIDS: 500.0,
    VolumeAction.HIGH_FLUIDS: 1500.0,
    VolumeAction.DIURETICS: -500.0,
}
_PRESSOR_COUNT = {"NoPressor": 0, "SinglePressor": 1, "MultiplePressors": 2}


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_cohort(cohort: Cohort, sink: IO[str]):
    """Write a cohort in the file format; parse_cohort(write_cohort(c)) == c."""
    sink.write(HEADER + "\n")
    for p in sorted(cohort.patients, key=lambda p: p.patient_id):
        sink.write(_dump({
            "patient_id": p.patient_id,
            "antibiotic_times": list(p.antibiotic_times),
            "culture_times": list(p.culture_times),
            "died_in_admission": p.died_in_admission,
            "age_band": p.age_band,
            "sex": p.sex,
            "history_flags": sorted(p.diagnosis_history),
            "stay_hours": p.stay_hours,
        }) + "\n")
        for step in p.steps:
            t = step.index * STEP_HOURS
            sink.write(_dump({
                "patient_id": p.patient_id,
                "step_hours_start": t,
                "feature": None,
                "value": None,
                "missing": False,
                "treatment_volume": _VOLUME_ML[step.treatments_given.volume],
                "treatment_pressor": _PRESSOR_COUNT[step.treatments_given.vasopressor.value],
                "on_cmo": step.on_cmo,
            }) + "\n")
            for idx, feat in enumerate(cohort.schema.features):
                if step.missing[idx] or feat.name.startswith("history_"):
                    continue
                value = step.values[idx]
                sink.write(_dump({
                    "patient_id": p.patient_id,
                    "step_hours_start": t,
                    "feature": feat.name,
                    "value": bool(value) if feat.kind is FeatureKind.BINARY else float(value),
                    "missing": False,
                    "treatment_volume": 0.0,
                    "treatment_pressor": 0,
                    "on_cmo": step.on_cmo,
                }) + "\n")


# ---------------------------------------------------------------------------
# Pipeline operations

def filter_sepsis_cohort(cohort: Cohort) -> Cohort:
    """Keep patients with an antibiotic/culture pair within 24 h and >=12 h stay."""
    kept = []
    for p in cohort.patients:
        if not p.steps:
            continue
        if p.stay_hours < 12.0:
            continue
        if not _has_close_pair(p.antibiotic_times, p.culture_times, 24.0):
            continue
        kept.append(p)
    return replace(cohort, patients=tuple(kept))


def _has_close_pair(times_a: tuple[float, ...], times_b: tuple[float, ...],
                    window: float) -> bool:
    return any(abs(a - b) <= window for a in times_a for b in times_b)


def nearest_rank_percentile(values: Iterable[float], percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("empty sample")
    if not 0.0 < percentile <= 1.0:
        raise ValueError("percentile must be in (0, 1]")
    rank = math.ceil(percentile * len(ordered))
    return ordered[rank - 1]


def truncate_long_stays(cohort: Cohort, percentile: float = 0.95) -> Cohort:
    """Drop all data past the empirical stay-length percentile."""
    if not 0.0 < percentile <= 1.0:
        raise ValueError("percentile must be in (0, 1]")
    if not cohort.patients:
        raise ValueError("cohort is empty")
    cutoff = nearest_rank_percentile((p.stay_hours for p in cohort.patients), percentile)
    out = []
    for p in cohort.patients:
        steps = tuple(s for s in p.steps if s.index * STEP_HOURS < cutoff)
        out.append(replace(p, steps=steps, stay_hours=min(p.stay_hours, cutoff)))
    return replace(cohort, patients=tuple(out))


def drop_post_cmo(trajectory: PatientTrajectory) -> PatientTrajectory:
    """Remove every step at or after the first comfort-measures-only step."""
    for pos, step in enumerate(trajectory.steps):
        if step.on_cmo:
            return replace(trajectory, steps=trajectory.steps[:pos])
    return trajectory


def split_train_eval(cohort: Cohort, seed: int) -> tuple[Cohort, Cohort]:
    """Seeded half split by patient; a function of the id set and seed only."""
    ids = sorted(p.patient_id for p in cohort.patients)
    if len(ids) < 2:
        raise ValueError("need at least 2 patients to split")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    n_train = math.ceil(len(ids) / 2)
    train_ids = set(shuffled[:n_train])
    by_id = {p.patient_id: p for p in cohort.patients}
    train = tuple(by_id[i] for i in sorted(train_ids))
    evaluation = tuple(by_id[i] for i in sorted(set(ids) - train_ids))
    return replace(cohort, patients=train), replace(cohort, patients=evaluation)
