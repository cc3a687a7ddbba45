"""Feature schema: the ordered indicator list every trajectory conforms to."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    BINARY = "binary"


class OrganSystem(str, Enum):
    CARDIAC = "cardiac"
    RENAL = "renal"
    HEPATIC = "hepatic"
    RESPIRATORY = "respiratory"
    NEUROLOGIC = "neurologic"
    HEMATOLOGIC = "hematologic"
    METABOLIC = "metabolic"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: FeatureKind
    unit: str
    normal_range: tuple[float, float] | None
    organ_system: OrganSystem


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        for f in self.features:
            if f.kind is FeatureKind.NUMERIC and not f.unit:
                raise ValueError(f"numeric feature {f.name!r} needs a unit")
            if f.normal_range is not None and not f.normal_range[0] < f.normal_range[1]:
                raise ValueError(f"feature {f.name!r}: normal_range.low must be < high")

    def __len__(self) -> int:
        return len(self.features)

    def index_of(self, name: str) -> int:
        try:
            return self._name_index[name]
        except AttributeError:
            object.__setattr__(
                self, "_name_index", {f.name: i for i, f in enumerate(self.features)}
            )
            return self._name_index[name]

    def has_feature(self, name: str) -> bool:
        try:
            self.index_of(name)
            return True
        except KeyError:
            return False

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def binary_mask(self) -> list[bool]:
        return [f.kind is FeatureKind.BINARY for f in self.features]


def _num(name, unit, lo, hi, system) -> Feature:
    return Feature(name, FeatureKind.NUMERIC, unit, (lo, hi), system)


def _bin(name, system) -> Feature:
    return Feature(name, FeatureKind.BINARY, "", None, system)


_C = OrganSystem.CARDIAC
_R = OrganSystem.RENAL
_H = OrganSystem.HEPATIC
_P = OrganSystem.RESPIRATORY
_N = OrganSystem.NEUROLOGIC
_B = OrganSystem.HEMATOLOGIC
_M = OrganSystem.METABOLIC

# 56 indicators, grouped by organ system. History flags double as binary
# features so similarity and unusualness can see prior diagnoses.
DEFAULT_SCHEMA = FeatureSchema(features=(
    _num("heart_rate", "bpm", 60.0, 100.0, _C),
    _num("systolic_bp", "mmHg", 90.0, 140.0, _C),
    _num("diastolic_bp", "mmHg", 60.0, 90.0, _C),
    _num("mean_arterial_pressure", "mmHg", 65.0, 100.0, _C),
    _num("central_venous_pressure", "mmHg", 2.0, 8.0, _C),
    _num("troponin", "ng/mL", 0.0, 0.04, _C),
    _num("norepinephrine_equiv_dose", "mcg/kg/min", 0.0, 0.01, _C),
    _bin("history_heart_failure", _C),
    _bin("history_valvular_disease", _C),

    _num("respiratory_rate", "breaths/min", 12.0, 20.0, _P),
    _num("spo2", "%", 94.0, 100.0, _P),
    _num("fio2", "fraction", 0.21, 0.40, _P),
    _num("pao2", "mmHg", 80.0, 100.0, _P),
    _num("paco2", "mmHg", 35.0, 45.0, _P),
    _num("pao2_fio2_ratio", "ratio", 300.0, 500.0, _P),
    _num("peep", "cmH2O", 0.0, 6.0, _P),
    _bin("on_mechanical_ventilation", _P),
    _bin("history_copd", _P),

    _num("creatinine", "mg/dL", 0.6, 1.2, _R),
    _num("blood_urea_nitrogen", "mg/dL", 7.0, 20.0, _R),
    _num("urine_output_4h", "mL", 100.0, 600.0, _R),
    _num("potassium", "mEq/L", 3.5, 5.0, _R),
    _num("fluid_balance_cumulative", "mL", -1000.0, 1500.0, _R),
    _bin("on_renal_replacement", _R),
    _bin("diuretic_active", _R),
    _bin("history_chronic_kidney_disease", _R),

    _num("bilirubin_total", "mg/dL", 0.1, 1.2, _H),
    _num("alanine_aminotransferase", "U/L", 7.0, 56.0, _H),
    _num("aspartate_aminotransferase", "U/L", 10.0, 40.0, _H),
    _num("albumin", "g/dL", 3.5, 5.0, _H),
    _num("inr", "ratio", 0.8, 1.2, _H),
    _num("ammonia", "umol/L", 11.0, 32.0, _H),
    _bin("history_cirrhosis", _H),

    _num("glasgow_coma_scale", "score", 13.0, 15.0, _N),
    _num("sedation_score", "score", -2.0, 0.0, _N),
    _bin("pupils_reactive", _N),
    _bin("delirium_positive", _N),
    _bin("history_stroke", _N),

    _num("white_blood_cell_count", "10^9/L", 4.0, 11.0, _B),
    _num("hemoglobin", "g/dL", 12.0, 17.0, _B),
    _num("platelet_count", "10^9/L", 150.0, 400.0, _B),
    _num("bands_percent", "%", 0.0, 5.0, _B),
    _num("partial_thromboplastin_time", "s", 25.0, 35.0, _B),
    _num("c_reactive_protein", "mg/L", 0.0, 10.0, _B),
    _bin("on_anticoagulation", _B),
    _bin("history_malignancy", _B),

    _num("lactate", "mmol/L", 0.5, 2.0, _M),
    _num("glucose", "mg/dL", 70.0, 140.0, _M),
    _num("sodium", "mEq/L", 135.0, 145.0, _M),
    _num("chloride", "mEq/L", 96.0, 106.0, _M),
    _num("bicarbonate", "mEq/L", 22.0, 28.0, _M),
    _num("arterial_ph", "pH", 7.35, 7.45, _M),
    _num("base_excess", "mEq/L", -2.0, 2.0, _M),
    _num("temperature", "degC", 36.1, 37.8, _M),
    _num("anion_gap", "mEq/L", 8.0, 12.0, _M),
    _bin("history_diabetes", _M),
))

assert len(DEFAULT_SCHEMA) == 56

HISTORY_FLAGS = [f.name for f in DEFAULT_SCHEMA.features if f.name.startswith("history_")]
