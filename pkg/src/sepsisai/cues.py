"""The eight reasoning cues computed from a case state and its neighbor set.

R1/R2 describe the case against its neighbors (consistent / unusual
features); R3/R4 are outcome risks (overall and plan-conditional); R5/R6
summarize peer actions (frequencies and consensus); R7 is the plan-mention
substrate; R8 is a recommendation. Threshold comparisons the contract pins
exactly (consensus strictly above 60%, risk bands at thirds, minimum plan
support) run in exact rational arithmetic so float drift cannot move a
boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import InsufficientNeighborsError
from .neighbors import NeighborSet
from .plans import ALL_PLANS, PressorAction, TreatmentPlan, VolumeAction


class CueKind(str, Enum):
    R1 = "R1_ConsistentFeatures"
    R2 = "R2_UnusualFeatures"
    R3 = "R3_RiskScore"
    R4 = "R4_DifferenceInRisk"
    R5 = "R5_ActionFrequency"
    R6 = "R6_ConsensusAction"
    R7 = "R7_PlanMention"
    R8 = "R8_RecommendedPlan"


class OutcomeKind(str, Enum):
    PRESSOR_AFTER_12H = "PressorAfter12h"
    MORTALITY = "InAdmissionMortality"


class RiskBand(str, Enum):
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"


class RecommendationBasis(str, Enum):
    BEST_RISK = "BestRisk"
    MOST_FREQUENT = "MostFrequent"


def _as_fraction(value) -> Fraction:
    """Coerce a threshold to an exact rational; floats via their decimal repr,
    so 0.60 means exactly 3/5."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class CueConfig:
    k: int = 100
    max_features_shown: int = 3
    consensus_threshold: Fraction = Fraction(3, 5)   # strict: consensus needs > this
    min_plan_support: int = 10
    significance_alpha: float = 0.05
    unusualness_z: float = 2.0
    risk_band_low_max: Fraction = Fraction(1, 3)
    risk_band_high_min: Fraction = Fraction(2, 3)
    epsilon: float = 1e-9

    def __post_init__(self):
        for name in ("consensus_threshold", "risk_band_low_max", "risk_band_high_min"):
            object.__setattr__(self, name, _as_fraction(getattr(self, name)))
        if not self.risk_band_low_max < self.risk_band_high_min:
            raise ValueError("risk band edges must satisfy low_max < high_min")
        if self.min_plan_support > self.k:
            raise ValueError("min_plan_support cannot exceed k")
        if self.k < 1 or self.max_features_shown < 1 or self.min_plan_support < 1:
            raise ValueError("k, max_features_shown, min_plan_support must be positive")


@dataclass(frozen=True)
class CaseState:
    """One (patient, step) as the cues see it: standardized and raw values."""
    patient_id: int
    step_index: int
    values_std: np.ndarray
    missing: np.ndarray
    values_raw: np.ndarray


@dataclass(frozen=True)
class FeatureFlag:
    feature: str
    case_value: float
    neighbor_mean: float
    neighbor_std: float
    score: float

    def to_dict(self) -> dict:
        return {"feature": self.feature, "case_value": self.case_value,
                "neighbor_mean": self.neighbor_mean,
                "neighbor_std": self.neighbor_std, "score": self.score}


@dataclass(frozen=True)
class RiskCue:
    outcome: OutcomeKind
    probability: float
    band: RiskBand
    numerator: int
    denominator: int

    def to_dict(self) -> dict:
        return {"outcome": self.outcome.value, "probability": self.probability,
                "band": self.band.value, "numerator": self.numerator,
                "denominator": self.denominator}


@dataclass(frozen=True)
class DifferenceCue:
    plan: TreatmentPlan
    risk_with_plan: float
    risk_without: float
    z_statistic: float
    p_value: float
    significant: bool
    insufficient_data: bool
    with_count: int
    without_count: int

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict(), "risk_with_plan": self.risk_with_plan,
                "risk_without": self.risk_without, "z_statistic": self.z_statistic,
                "p_value": self.p_value, "significant": self.significant,
                "insufficient_data": self.insufficient_data,
                "with_count": self.with_count, "without_count": self.without_count}


@dataclass(frozen=True)
class FrequencyTable:
    counts: tuple[int, ...]             # aligned with ALL_PLANS (12 entries)
    volume_marginals: dict[VolumeAction, int]
    vasopressor_marginals: dict[PressorAction, int]
    total: int

    def count_for(self, plan: TreatmentPlan) -> int:
        return self.counts[ALL_PLANS.index(plan)]

    def to_dict(self) -> dict:
        return {
            "counts": [{"volume": p.volume.value, "vasopressor": p.vasopressor.value,
                        "count": c} for p, c in zip(ALL_PLANS, self.counts)],
            "volume_marginals": {a.value: n for a, n in self.volume_marginals.items()},
            "vasopressor_marginals": {a.value: n for a, n in self.vasopressor_marginals.items()},
            "total": self.total,
        }


@dataclass(frozen=True)
class AxisConsensus:
    action: str | None
    fraction: float
    consensus: bool

    def to_dict(self) -> dict:
        return {"action": self.action, "fraction": self.fraction,
                "consensus": self.consensus}


@dataclass(frozen=True)
class ConsensusSummary:
    volume: AxisConsensus
    vasopressor: AxisConsensus
    total: int

    def to_dict(self) -> dict:
        return {"volume": self.volume.to_dict(),
                "vasopressor": self.vasopressor.to_dict(), "total": self.total}


@dataclass(frozen=True)
class Recommendation:
    plan: TreatmentPlan | None          # None = explicit no-recommendation
    basis: RecommendationBasis
    supporting: dict

    def to_dict(self) -> dict:
        return {"plan": self.plan.to_dict() if self.plan else None,
                "basis": self.basis.value, "supporting": self.supporting}


@dataclass(frozen=True)
class CueProvenance:
    neighbor_count: int
    query_step: int

    def to_dict(self) -> dict:
        return {"neighbor_count": self.neighbor_count, "query_step": self.query_step}


@dataclass(frozen=True)
class ReasoningCue:
    kind: CueKind
    payload: object
    provenance: CueProvenance

    def to_dict(self) -> dict:
        if isinstance(self.payload, (list, tuple)):
            payload = [p.to_dict() for p in self.payload]
        else:
            payload = self.payload.to_dict()
        return {"kind": self.kind.value, "payload": payload,
                "provenance": self.provenance.to_dict()}


# ---------------------------------------------------------------------------
# Standard-normal CDF (double precision via the complementary error function)

SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT2)


def two_sided_p(z: float) -> float:
    """P(|Z| >= |z|) for a standard normal Z."""
    return math.erfc(abs(z) / SQRT2)


# ---------------------------------------------------------------------------
# Shared neighbor views

def _member_indices(neighbors: NeighborSet) -> list[int]:
    return [m.entry_index for m in neighbors.members]


def _neighbor_feature_matrix(neighbors: NeighborSet) -> np.ndarray:
    return neighbors.index.features_std[_member_indices(neighbors)]


def _require_neighbors(neighbors: NeighborSet, minimum: int):
    if len(neighbors) < minimum:
        raise InsufficientNeighborsError(
            f"need at least {minimum} neighbors, have {len(neighbors)}"
        )


def _outcome_flags(neighbors: NeighborSet, outcome: OutcomeKind) -> np.ndarray:
    idx = _member_indices(neighbors)
    if outcome is OutcomeKind.MORTALITY:
        return neighbors.index.died[idx]
    return neighbors.index.pressor_after_12h[idx]


def _next_plan_codes(neighbors: NeighborSet) -> np.ndarray:
    return neighbors.index.next_plan_codes[_member_indices(neighbors)]


# ---------------------------------------------------------------------------
# R1 / R2: case description cues

def _display_stats(index, j: int, case_std: float, mu_std: float,
                   sigma_std: float) -> tuple[float, float, float]:
    """Report flag values in raw units; scoring stays in standardized space."""
    mean = float(index.feature_means[j])
    std = float(index.feature_stds[j])
    return case_std * std + mean, mu_std * std + mean, sigma_std * std


def consistent_features(case: CaseState, neighbors: NeighborSet,
                        cfg: CueConfig) -> list[FeatureFlag]:
    """R1: features where the case agrees with an unusually tight neighborhood.

    Numeric features qualify when the case sits within one neighbor standard
    deviation of the neighbor mean, ranked by ascending dispersion relative
    to the indexed population; binary features qualify when at least 90% of
    neighbors share the case's value. Case features flagged missing are
    skipped (their values are imputations, not observations).
    """
    _require_neighbors(neighbors, 2)
    index = neighbors.index
    feats = _neighbor_feature_matrix(neighbors)
    mu = feats.mean(axis=0)
    sigma = feats.std(axis=0)
    pop = index.feature_population_std
    flags: list[tuple[float, int, FeatureFlag]] = []
    for j in range(feats.shape[1]):
        if case.missing[j]:
            continue
        c = float(case.values_std[j])
        if index.feature_binary[j]:
            share = float(np.mean(np.abs(feats[:, j] - c) < 1e-9))
            if share < 0.9:
                continue
            score = share
        else:
            z = abs(c - mu[j]) / (sigma[j] + cfg.epsilon)
            if z > 1.0:
                continue
            ratio = sigma[j] / (pop[j] + cfg.epsilon)
            score = 1.0 - min(float(ratio), 1.0)
        raw_case, raw_mu, raw_sigma = _display_stats(index, j, c, float(mu[j]), float(sigma[j]))
        flags.append((score, j, FeatureFlag(
            feature=index.feature_names[j], case_value=raw_case,
            neighbor_mean=raw_mu, neighbor_std=raw_sigma, score=float(score))))
    flags.sort(key=lambda t: (-t[0], t[1]))
    return [f for _, _, f in flags[:cfg.max_features_shown]]


def unusual_features(case: CaseState, neighbors: NeighborSet,
                     cfg: CueConfig) -> list[FeatureFlag]:
    """R2: features where the case diverges most from its neighbors.

    Numeric score is the case z-score against the neighbor distribution
    (flagged above `unusualness_z`); binary score is the fraction of
    neighbors that do NOT share the case's value (flagged at >= 0.9).
    """
    _require_neighbors(neighbors, 2)
    index = neighbors.index
    feats = _neighbor_feature_matrix(neighbors)
    mu = feats.mean(axis=0)
    sigma = feats.std(axis=0)
    flags: list[tuple[float, int, FeatureFlag]] = []
    for j in range(feats.shape[1]):
        if case.missing[j]:
            continue
        c = float(case.values_std[j])
        if index.feature_binary[j]:
            share = float(np.mean(np.abs(feats[:, j] - c) < 1e-9))
            score = 1.0 - share
            if score < 0.9:
                continue
        else:
            score = abs(c - mu[j]) / (float(sigma[j]) + cfg.epsilon)
            if score <= cfg.unusualness_z:
                continue
        raw_case, raw_mu, raw_sigma = _display_stats(index, j, c, float(mu[j]), float(sigma[j]))
        flags.append((score, j, FeatureFlag(
            feature=index.feature_names[j], case_value=raw_case,
            neighbor_mean=raw_mu, neighbor_std=raw_sigma, score=float(score))))
    flags.sort(key=lambda t: (-t[0], t[1]))
    return [f for _, _, f in flags[:cfg.max_features_shown]]


# ---------------------------------------------------------------------------
# R3: risk score

def _band(numerator: int, denominator: int, cfg: CueConfig) -> RiskBand:
    p = Fraction(numerator, denominator) if denominator else Fraction(0)
    if p <= cfg.risk_band_low_max:
        return RiskBand.LOW
    if p >= cfg.risk_band_high_min:
        return RiskBand.HIGH
    return RiskBand.MODERATE


def risk_score(neighbors: NeighborSet, outcome: OutcomeKind,
               cfg: CueConfig) -> RiskCue:
    """R3: empirical event probability among the neighbors, as an exact ratio."""
    _require_neighbors(neighbors, 1)
    flags = _outcome_flags(neighbors, outcome)
    numerator = int(flags.sum())
    denominator = int(flags.size)
    return RiskCue(outcome=outcome, probability=numerator / denominator,
                   band=_band(numerator, denominator, cfg),
                   numerator=numerator, denominator=denominator)


def conditional_risk(neighbors: NeighborSet, plan: TreatmentPlan,
                     outcome: OutcomeKind, cfg: CueConfig) -> RiskCue:
    """R3 restricted to neighbors whose next-step plan matches `plan`.

    A zero denominator reports probability 0 with denominator 0; the paired
    R4 cue carries the insufficient-data state the interface shows."""
    codes = _next_plan_codes(neighbors)
    flags = _outcome_flags(neighbors, outcome)
    mask = codes == ALL_PLANS.index(plan)
    numerator = int(flags[mask].sum())
    denominator = int(mask.sum())
    probability = numerator / denominator if denominator else 0.0
    return RiskCue(outcome=outcome, probability=probability,
                   band=_band(numerator, denominator, cfg),
                   numerator=numerator, denominator=denominator)


# ---------------------------------------------------------------------------
# R4: plan-conditional difference in risk

def plan_conditional_risk(neighbors: NeighborSet, plan: TreatmentPlan,
                          outcome: OutcomeKind, cfg: CueConfig,
                          versus: TreatmentPlan | None = None) -> DifferenceCue:
    """R4: two-proportion pooled z-test of plan vs the rest (or vs one other
    plan when `versus` is given). Under `min_plan_support` in either group the
    cue reports insufficient data instead of a test result."""
    codes = _next_plan_codes(neighbors)
    flags = _outcome_flags(neighbors, outcome)
    labeled = codes >= 0
    with_mask = labeled & (codes == ALL_PLANS.index(plan))
    if versus is None:
        without_mask = labeled & ~with_mask
    else:
        without_mask = labeled & (codes == ALL_PLANS.index(versus))
    n1, n2 = int(with_mask.sum()), int(without_mask.sum())
    e1, e2 = int(flags[with_mask].sum()), int(flags[without_mask].sum())
    risk_with = e1 / n1 if n1 else 0.0
    risk_without = e2 / n2 if n2 else 0.0
    if n1 < cfg.min_plan_support or n2 < cfg.min_plan_support:
        return DifferenceCue(plan=plan, risk_with_plan=risk_with,
                             risk_without=risk_without, z_statistic=0.0,
                             p_value=1.0, significant=False,
                             insufficient_data=True, with_count=n1, without_count=n2)
    pooled = (e1 + e2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        z, p = 0.0, 1.0
    else:
        z = (risk_with - risk_without) / se
        p = two_sided_p(z)
    return DifferenceCue(plan=plan, risk_with_plan=risk_with,
                         risk_without=risk_without, z_statistic=z, p_value=p,
                         significant=p < cfg.significance_alpha,
                         insufficient_data=False, with_count=n1, without_count=n2)


# ---------------------------------------------------------------------------
# R5: action frequencies (also the R7 plan-mention substrate)

def action_frequencies(neighbors: NeighborSet) -> FrequencyTable:
    """Exact next-plan counts over the full 12-plan space; zero counts stay
    enumerated (they are the plan mentions). Final steps carry no next plan
    and are excluded from the total."""
    codes = _next_plan_codes(neighbors)
    counts = [0] * len(ALL_PLANS)
    for code in codes:
        if code >= 0:
            counts[int(code)] += 1
    volume = {a: 0 for a in VolumeAction}
    pressor = {a: 0 for a in PressorAction}
    for plan, c in zip(ALL_PLANS, counts):
        volume[plan.volume] += c
        pressor[plan.vasopressor] += c
    return FrequencyTable(counts=tuple(counts), volume_marginals=volume,
                          vasopressor_marginals=pressor, total=sum(counts))


# ---------------------------------------------------------------------------
# R6: consensus action

def consensus_action(freq: FrequencyTable, cfg: CueConfig) -> ConsensusSummary:
    """R6: per-axis consensus present iff the top marginal fraction is
    strictly above the threshold (exact rational comparison)."""
    if freq.total < 1:
        raise InsufficientNeighborsError("no neighbors carry a next plan")

    def axis(marginals: dict) -> AxisConsensus:
        best_action, best_count = None, -1
        for action, count in marginals.items():   # insertion order = enum order
            if count > best_count:
                best_action, best_count = action, count
        has = Fraction(best_count, freq.total) > cfg.consensus_threshold
        return AxisConsensus(action=best_action.value if has else None,
                             fraction=best_count / freq.total, consensus=bool(has))

    return ConsensusSummary(volume=axis(freq.volume_marginals),
                            vasopressor=axis(freq.vasopressor_marginals),
                            total=freq.total)


# ---------------------------------------------------------------------------
# R8: recommended plan

def recommend_plan(neighbors: NeighborSet, outcome: OutcomeKind,
                   freq: FrequencyTable, cfg: CueConfig,
                   basis: RecommendationBasis) -> Recommendation:
    """R8: BestRisk minimizes the conditional event rate over plans with
    enough support (ties to larger support, then plan-enum order);
    MostFrequent takes the per-axis marginal argmax. No supported plan yields
    an explicit no-recommendation rather than an error."""
    if basis is RecommendationBasis.MOST_FREQUENT:
        def argmax(marginals: dict):
            best, best_count = None, -1
            for action, count in marginals.items():
                if count > best_count:
                    best, best_count = action, count
            return best, best_count

        vol, vol_count = argmax(freq.volume_marginals)
        pres, pres_count = argmax(freq.vasopressor_marginals)
        return Recommendation(plan=TreatmentPlan(vol, pres), basis=basis, supporting={
            "volume_count": vol_count, "vasopressor_count": pres_count,
            "total": freq.total,
        })

    codes = _next_plan_codes(neighbors)
    flags = _outcome_flags(neighbors, outcome)
    best = None   # ((risk, -support, plan order), plan, events, support)
    for i, plan in enumerate(ALL_PLANS):
        support = freq.counts[i]
        if support < cfg.min_plan_support:
            continue
        events = int(flags[codes == i].sum())
        key = (Fraction(events, support), -support, i)
        if best is None or key < best[0]:
            best = (key, plan, events, support)
    if best is None:
        return Recommendation(plan=None, basis=basis, supporting={
            "reason": "no plan has sufficient support",
            "min_plan_support": cfg.min_plan_support,
        })
    _, plan, events, support = best
    return Recommendation(plan=plan, basis=basis, supporting={
        "outcome": outcome.value, "numerator": events, "denominator": support,
        "risk": events / support,
    })
