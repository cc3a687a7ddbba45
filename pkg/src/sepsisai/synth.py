"""Seeded synthetic sepsis-like cohorts for exercising the full pipeline.

Each patient gets a latent severity trajectory in [0, 1]; features are drawn
from a linear-Gaussian model whose loadings push values out of their normal
ranges as severity rises, so raw-feature neighbors are clinically coherent.
Treatments come from a severity-conditioned policy with two deliberate
clinician styles so neighborhoods exist both with and without a consensus
action. No clinical realism is claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cohort import Cohort, PatientTrajectory, Timestep, abnormal_direction
from .plans import PressorAction, TreatmentPlan, VolumeAction
from .schema import DEFAULT_SCHEMA, FeatureKind, FeatureSchema, HISTORY_FLAGS


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int = 100
    mean_stay_steps: int = 12
    severity_mix: tuple[float, float, float] = (0.4, 0.35, 0.25)  # mild/moderate/severe
    mortality_rate: float = 0.2
    pressor_after_12h_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_patients < 2:
            raise ValueError("n_patients must be >= 2")
        if self.mean_stay_steps < 1:
            raise ValueError("mean_stay_steps must be positive")
        mix = self.severity_mix
        if len(mix) != 3 or any(not 0.0 <= m <= 1.0 for m in mix):
            raise ValueError("severity_mix must be three fractions in [0, 1]")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ValueError("severity_mix must sum to 1")
        for rate in (self.mortality_rate, self.pressor_after_12h_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("outcome base rates must be fractions")


@dataclass(frozen=True)
class CaseVignette:
    patient_id: int
    pseudonym: str
    profile: str
    complicating_factors: tuple[str, ...]
    text: str


# Severity loading direction per feature: +1 rises when sicker, -1 falls.
# Unlisted numeric features drift mildly upward.
_DIRECTION = {
    "systolic_bp": -1, "diastolic_bp": -1, "mean_arterial_pressure": -1,
    "spo2": -1, "pao2": -1, "pao2_fio2_ratio": -1, "urine_output_4h": -1,
    "albumin": -1, "glasgow_coma_scale": -1, "sedation_score": -1,
    "hemoglobin": -1, "platelet_count": -1, "bicarbonate": -1,
    "arterial_ph": -1, "base_excess": -1, "sodium": -1,
    "central_venous_pressure": 1, "heart_rate": 1, "respiratory_rate": 1,
    "troponin": 1, "norepinephrine_equiv_dose": 1, "fio2": 1, "paco2": 1,
    "peep": 1, "creatinine": 1, "blood_urea_nitrogen": 1, "potassium": 1,
    "fluid_balance_cumulative": 1, "bilirubin_total": 1,
    "alanine_aminotransferase": 1, "aspartate_aminotransferase": 1,
    "inr": 1, "ammonia": 1, "white_blood_cell_count": 1, "bands_percent": 1,
    "partial_thromboplastin_time": 1, "c_reactive_protein": 1, "lactate": 1,
    "glucose": 1, "anion_gap": 1, "temperature": 1, "chloride": 1,
}

_CLIP = {
    "spo2": (50.0, 100.0), "fio2": (0.21, 1.0), "glasgow_coma_scale": (3.0, 15.0),
    "urine_output_4h": (0.0, 2000.0), "temperature": (34.0, 42.0),
    "arterial_ph": (6.8, 7.8), "sedation_score": (-5.0, 1.0),
    "troponin": (0.0, 50.0), "norepinephrine_equiv_dose": (0.0, 3.0),
    "peep": (0.0, 24.0), "lactate": (0.1, 25.0), "bilirubin_total": (0.05, 40.0),
}

_HISTORY_RATE = {
    "history_heart_failure": 0.15, "history_valvular_disease": 0.06,
    "history_copd": 0.12, "history_chronic_kidney_disease": 0.14,
    "history_cirrhosis": 0.07, "history_stroke": 0.08,
    "history_malignancy": 0.10, "history_diabetes": 0.25,
}

# Class multipliers on the mortality base rate (mild, moderate, severe).
_MORTALITY_WEIGHT = np.array([0.25, 1.0, 1.75])

_VITAL_SYSTEMS = {"cardiac", "respiratory"}


def generate_cohort(config: GeneratorConfig, schema: FeatureSchema = DEFAULT_SCHEMA) -> Cohort:
    """Generate a deterministic cohort; a pure function of (config, schema)."""
    rng = np.random.default_rng(config.seed)
    mix = np.asarray(config.severity_mix)
    norm = float(mix @ _MORTALITY_WEIGHT)
    death_rate_by_class = np.clip(config.mortality_rate * _MORTALITY_WEIGHT / norm, 0.0, 0.95)
    pressor_scale = config.pressor_after_12h_rate / 0.3

    feats = schema.features
    n_feat = len(feats)
    numeric = np.array([f.kind is FeatureKind.NUMERIC for f in feats])
    lo = np.array([f.normal_range[0] if f.normal_range else 0.0 for f in feats])
    hi = np.array([f.normal_range[1] if f.normal_range else 1.0 for f in feats])
    width = hi - lo
    mid = (lo + hi) / 2.0
    direction = np.array([_DIRECTION.get(f.name, 1) if f.normal_range else 0 for f in feats])
    vitals = np.array([f.organ_system.value in _VITAL_SYSTEMS or f.name == "temperature"
                       for f in feats])
    obs_prob = np.where(vitals, 0.9, 0.45)
    binary_step = np.array([f.kind is FeatureKind.BINARY and not f.name.startswith("history_")
                            for f in feats])
    idx_of = {f.name: i for i, f in enumerate(feats)}

    patients = []
    for pid in range(1, config.n_patients + 1):
        patients.append(_generate_patient(
            pid, rng, config, schema, death_rate_by_class, pressor_scale,
            numeric, lo, hi, width, mid, direction, obs_prob, binary_step, idx_of, n_feat,
        ))
    return Cohort(schema=schema, patients=tuple(patients), provenance="synthetic")


def _generate_patient(pid, rng, config, schema, death_rate_by_class, pressor_scale,
                      numeric, lo, hi, width, mid, direction, obs_prob, binary_step,
                      idx_of, n_feat) -> PatientTrajectory:
    sev_class = rng.choice(3, p=config.severity_mix)
    s0 = float(rng.uniform((0.05, 0.35, 0.65)[sev_class], (0.35, 0.65, 0.95)[sev_class]))
    died = bool(rng.random() < death_rate_by_class[sev_class])
    style_fluid_liberal = bool(rng.random() < 0.5)

    n_steps = max(4, 4 + int(rng.poisson(max(config.mean_stay_steps - 4, 1))))
    stay_hours = 4.0 * n_steps - float(rng.uniform(0.0, 3.9))

    drift = 0.018 if died else -0.012
    severities = np.empty(n_steps)
    s = s0
    for k in range(n_steps):
        severities[k] = s
        s = float(np.clip(s + drift + rng.normal(0.0, 0.04), 0.02, 0.98))

    # Latent-severity linear-Gaussian features.
    baseline = mid + rng.normal(0.0, width / 10.0, size=n_feat)
    noise = rng.normal(0.0, 1.0, size=(n_steps, n_feat)) * (width / 8.0)
    values = baseline + direction * 0.9 * width * severities[:, None] + noise
    for name, (c_lo, c_hi) in _CLIP.items():
        i = idx_of[name]
        values[:, i] = np.clip(values[:, i], c_lo, c_hi)

    # Per-patient history flags, mildly tied to baseline severity.
    history = frozenset(
        name for name in HISTORY_FLAGS
        if rng.random() < min(0.9, _HISTORY_RATE[name] * (1.0 + 0.8 * s0))
    )
    for name in HISTORY_FLAGS:
        values[:, idx_of[name]] = 1.0 if name in history else 0.0

    # Binary step features: severity-driven onset with persistence.
    on_prob = {
        "on_mechanical_ventilation": lambda sv: 0.8 * max(0.0, sv - 0.35),
        "on_renal_replacement": lambda sv: 0.5 * max(0.0, sv - 0.6),
        "delirium_positive": lambda sv: 0.08 + 0.3 * sv,
        "on_anticoagulation": lambda sv: 0.2,
        "pupils_reactive": None,  # handled below: reactive unless very sick
        "diuretic_active": None,  # linked to the treatment policy below
    }
    for name, prob in on_prob.items():
        i = idx_of[name]
        if prob is None:
            continue
        state = 0.0
        for k in range(n_steps):
            if state == 1.0:
                state = 1.0 if rng.random() < 0.9 else 0.0
            else:
                state = 1.0 if rng.random() < prob(severities[k]) else 0.0
            values[k, i] = state
    i_pupils = idx_of["pupils_reactive"]
    for k in range(n_steps):
        values[k, i_pupils] = 0.0 if rng.random() < 0.25 * max(0.0, severities[k] - 0.7) else 1.0

    # Treatment policy with two practice styles; keeps treatment-linked
    # features coherent with the administered plan.
    plans = []
    fluid_balance = float(rng.normal(0.0, 200.0))
    prev_sev = severities[0]
    for k in range(n_steps):
        sv = severities[k]
        worsening = sv >= prev_sev
        p_pressor = np.clip(1.6 * (sv - 0.45), 0.0, 0.9)
        if not style_fluid_liberal:
            p_pressor = np.clip(p_pressor + 0.15, 0.0, 0.95)
        if 4 <= k:
            p_pressor = np.clip(p_pressor * pressor_scale, 0.0, 0.95)
        if rng.random() < p_pressor:
            pressor = (PressorAction.MULTIPLE_PRESSORS
                       if sv > 0.75 and rng.random() < 0.5 else PressorAction.SINGLE_PRESSOR)
        else:
            pressor = PressorAction.NO_PRESSOR

        p_diurese = 0.55 if (fluid_balance > 1500.0 and not worsening) else 0.05
        if rng.random() < p_diurese:
            volume = VolumeAction.DIURETICS
        else:
            p_high = np.clip(1.4 * (sv - 0.3), 0.0, 0.75)
            if not style_fluid_liberal:
                p_high *= 0.45
            if rng.random() < p_high:
                volume = VolumeAction.HIGH_FLUIDS
            elif rng.random() < 0.45 + (0.2 if style_fluid_liberal else 0.0):
                volume = VolumeAction.LOW_FLUIDS
            else:
                volume = VolumeAction.NO_VOLUME

        plans.append(TreatmentPlan(volume, pressor))
        given = {VolumeAction.NO_VOLUME: 0.0, VolumeAction.LOW_FLUIDS: 500.0,
                 VolumeAction.HIGH_FLUIDS: 1500.0, VolumeAction.DIURETICS: -500.0}[volume]
        fluid_balance += given - float(rng.uniform(50.0, 250.0))
        values[k, idx_of["fluid_balance_cumulative"]] = fluid_balance
        values[k, idx_of["diuretic_active"]] = 1.0 if volume is VolumeAction.DIURETICS else 0.0
        n_pressors = {PressorAction.NO_PRESSOR: 0, PressorAction.SINGLE_PRESSOR: 1,
                      PressorAction.MULTIPLE_PRESSORS: 2}[pressor]
        values[k, idx_of["norepinephrine_equiv_dose"]] = (
            0.0 if n_pressors == 0 else float(np.clip(rng.normal(0.08 * n_pressors * (1 + sv), 0.03),
                                                      0.01, 3.0)))
        prev_sev = sv

    # Observation mask: vitals dense, labs sparse, a few never-sampled labs.
    observed = rng.random((n_steps, n_feat)) < obs_prob
    never = (rng.random(n_feat) < 0.03) & numeric & ~np.array(
        [f.organ_system.value in _VITAL_SYSTEMS for f in schema.features])
    observed[:, never] = False
    observed[0, :] |= ~never        # admission panel: everything sampled once
    observed[:, ~numeric] = True    # chart states are always known
    observed[:, never] = False

    steps = []
    cur = np.zeros(n_feat)
    seen = np.zeros(n_feat, dtype=bool)
    cmo_from = _cmo_step(rng, died, n_steps)
    for k in range(n_steps):
        obs_k = observed[k]
        cur[obs_k] = values[k, obs_k]
        seen |= obs_k
        steps.append(Timestep(
            index=k,
            values=np.where(seen, cur, 0.0),
            missing=~seen,
            treatments_given=plans[k],
            on_cmo=cmo_from is not None and k >= cmo_from,
        ))

    qualifying = rng.random() < 0.98
    t_abx = float(rng.uniform(0.0, 6.0))
    gap = float(rng.uniform(0.0, 20.0)) if qualifying else float(rng.uniform(26.0, 40.0))
    t_culture = t_abx + gap

    return PatientTrajectory(
        patient_id=pid,
        age_band=str(rng.choice(["40s", "50s", "60s", "70s", "80s"])),
        sex=str(rng.choice(["female", "male"])),
        diagnosis_history=history,
        steps=tuple(steps),
        antibiotic_times=(t_abx,),
        culture_times=(t_culture,),
        died_in_admission=died,
        stay_hours=stay_hours,
    )


def _cmo_step(rng, died: bool, n_steps: int) -> int | None:
    if died and n_steps >= 5 and rng.random() < 0.3:
        return int(rng.integers(max(3, n_steps - 2), n_steps))
    return None


# ---------------------------------------------------------------------------
# Vignettes

_FEMALE_NAMES = ["Deborah", "Heather", "Esther", "Margaret", "Angela", "Ruth",
                 "Carol", "Pauline"]
_MALE_NAMES = ["Richard", "Walter", "Harold", "Vincent", "Stanley", "Eugene",
               "Arthur", "Leonard"]
_SURNAMES = ["Walker", "Thompson", "Sullivan", "Goldberg", "Mercer", "Okafor",
             "Lindqvist", "Barone", "Whitfield", "Nakamura", "Petrov", "Calloway"]

_FILLER = [
    "Nursing notes from the most recent shift describe the patient as arousable and intermittently following commands.",
    "Skin remains warm with brisk capillary refill, and peripheral pulses are palpable in all four extremities.",
    "The bedside monitor shows no sustained arrhythmias over the past several hours of telemetry review.",
    "Family members are at the bedside and report that the patient was in their usual state of health until this illness.",
    "A repeat physical examination finds the abdomen soft and non-distended with normoactive bowel sounds.",
    "Overnight events were notable only for brief agitation that resolved without additional medication.",
    "The respiratory therapist documents stable ventilator settings with no new secretions on suctioning.",
    "Lines and tubes include a right internal jugular central line placed on admission without complication.",
    "Morning chest radiograph is read as stable compared with the prior study, without new focal consolidation.",
    "The overnight resident notes that urine has remained clear and the catheter is draining without obstruction.",
]

_TREATMENT_PHRASE = {
    VolumeAction.NO_VOLUME: "no additional volume",
    VolumeAction.LOW_FLUIDS: "a modest crystalloid bolus of under a liter",
    VolumeAction.HIGH_FLUIDS: "more than a liter of crystalloid",
    VolumeAction.DIURETICS: "intravenous diuretics",
}
_PRESSOR_PHRASE = {
    PressorAction.NO_PRESSOR: "no vasopressor support",
    PressorAction.SINGLE_PRESSOR: "a single vasopressor infusion",
    PressorAction.MULTIPLE_PRESSORS: "multiple vasopressor infusions",
}


def _history_phrase(flag: str) -> str:
    return flag.removeprefix("history_").replace("_", " ")


def generate_vignette(trajectory: PatientTrajectory, seed: int,
                      schema: FeatureSchema = DEFAULT_SCHEMA,
                      step: int | None = None) -> CaseVignette:
    """Template narrative (200-300 words) anchored on the case's abnormalities.

    `step` fixes the decision point the vignette describes; it defaults to the
    trajectory's final step.
    """
    if not trajectory.steps:
        raise ValueError("trajectory has no steps")
    if step is None:
        step = len(trajectory.steps) - 1
    if not 0 <= step < len(trajectory.steps):
        raise ValueError(f"step {step} out of range")
    rng = np.random.default_rng([seed, trajectory.patient_id])
    last = trajectory.steps[step]
    hour = int(last.index * 4)

    flags = []
    for i, feat in enumerate(schema.features):
        if last.missing[i] or feat.normal_range is None:
            continue
        side = abnormal_direction(feat, float(last.values[i]))
        if side is None:
            continue
        dist = abs(float(last.values[i]) - (feat.normal_range[0] if side == "low"
                                            else feat.normal_range[1]))
        span = feat.normal_range[1] - feat.normal_range[0]
        flags.append((dist / span, side, feat, float(last.values[i])))
    if not flags:
        raise ValueError(
            f"patient {trajectory.patient_id}: no abnormal features; cannot write "
            "a vignette with an empty complicating-factors list"
        )
    flags.sort(key=lambda f: (-f[0], f[2].name))

    factors = tuple(
        f"{'low' if side == 'low' else 'elevated'} {feat.name.replace('_', ' ')} "
        f"({value:g} {feat.unit})".rstrip()
        for _, side, feat, value in flags[:6]
    )

    female = trajectory.sex == "female"
    first = (_FEMALE_NAMES if female else _MALE_NAMES)[int(rng.integers(0, 8))]
    pseudonym = f"{first} {_SURNAMES[int(rng.integers(0, len(_SURNAMES)))]}"
    profile = (f"{'Female' if female else 'Male'}, age {trajectory.age_band}; "
               f"hour {hour} of ICU stay")
    pronoun, possessive = ("She", "Her") if female else ("He", "His")

    sentences = [
        f"{pseudonym} is a {'woman' if female else 'man'} in {possessive.lower()} "
        f"{trajectory.age_band} admitted to the intensive care unit with suspected sepsis, "
        f"now at hour {hour} of the stay.",
        f"Empiric antibiotics were started at hour {trajectory.antibiotic_times[0]:.0f} "
        f"and blood cultures were drawn at hour {trajectory.culture_times[0]:.0f}.",
    ]
    history = sorted(trajectory.diagnosis_history)
    if history:
        listed = ", ".join(_history_phrase(h) for h in history)
        sentences.append(f"{possessive} medical history is notable for {listed}.")
    else:
        sentences.append(f"{pronoun} has no significant prior medical history on record.")

    for _, side, feat, value in flags[:6]:
        lo, hi = feat.normal_range
        bound = f"{lo:g}" if side == "low" else f"{hi:g}"
        rel = "below" if side == "low" else "above"
        sentences.append(
            f"At hour {hour}, {feat.name.replace('_', ' ')} is {value:g} {feat.unit}, "
            f"{rel} the reference bound of {bound} {feat.unit}.".replace("  ", " ")
        )

    plan = last.treatments_given
    sentences.append(
        f"Over the most recent four-hour interval the team administered "
        f"{_TREATMENT_PHRASE[plan.volume]} with {_PRESSOR_PHRASE[plan.vasopressor]}."
    )
    if step > 0:
        first_step = trajectory.steps[0]
        i_lac = schema.index_of("lactate")
        if not first_step.missing[i_lac] and not last.missing[i_lac]:
            sentences.append(
                f"Compared with admission, lactate has moved from "
                f"{first_step.values[i_lac]:g} to {last.values[i_lac]:g} mmol/L."
            )

    filler_order = rng.permutation(len(_FILLER))
    i = 0
    while sum(len(s.split()) for s in sentences) < 200:
        sentences.append(_FILLER[filler_order[i % len(_FILLER)]])
        i += 1
    text = " ".join(sentences)
    assert 200 <= len(text.split()) <= 300, "vignette template out of bounds"

    return CaseVignette(
        patient_id=trajectory.patient_id,
        pseudonym=pseudonym,
        profile=profile,
        complicating_factors=factors,
        text=text,
    )
