"""Treatment plan space: one volume action crossed with one vasopressor action."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class VolumeAction(str, Enum):
    NO_VOLUME = "NoVolume"
    LOW_FLUIDS = "LowFluids"        # >0 and <=1000 mL over the 4-hour step
    HIGH_FLUIDS = "HighFluids"      # >1000 mL over the step
    DIURETICS = "Diuretics"


class PressorAction(str, Enum):
    NO_PRESSOR = "NoPressor"
    SINGLE_PRESSOR = "SinglePressor"
    MULTIPLE_PRESSORS = "MultiplePressors"


@dataclass(frozen=True, order=True)
class TreatmentPlan:
    volume: VolumeAction
    vasopressor: PressorAction

    def to_dict(self) -> dict:
        return {"volume": self.volume.value, "vasopressor": self.vasopressor.value}

    @classmethod
    def from_dict(cls, d: dict) -> "TreatmentPlan":
        return cls(VolumeAction(d["volume"]), PressorAction(d["vasopressor"]))

    def __str__(self) -> str:
        return f"{self.volume.value}|{self.vasopressor.value}"


# Enum order here fixes plan-enum order for tie-breaking in recommendations.
ALL_PLANS: tuple[TreatmentPlan, ...] = tuple(
    TreatmentPlan(v, p) for v in VolumeAction for p in PressorAction
)

NO_TREATMENT = TreatmentPlan(VolumeAction.NO_VOLUME, PressorAction.NO_PRESSOR)


def classify_volume(fluid_ml: float, diuretic_ml: float) -> VolumeAction:
    """Map administered volumes over one step to a volume action.

    Fluids and diuretics are mutually exclusive per step; when both occur the
    axis with more administered volume wins (fluids on an exact tie).
    """
    if fluid_ml <= 0.0 and diuretic_ml <= 0.0:
        return VolumeAction.NO_VOLUME
    if diuretic_ml > fluid_ml:
        return VolumeAction.DIURETICS
    return VolumeAction.HIGH_FLUIDS if fluid_ml > 1000.0 else VolumeAction.LOW_FLUIDS


def classify_pressor(n_active: int) -> PressorAction:
    if n_active <= 0:
        return PressorAction.NO_PRESSOR
    return PressorAction.SINGLE_PRESSOR if n_active == 1 else PressorAction.MULTIPLE_PRESSORS
