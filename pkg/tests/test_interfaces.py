"""Interface composition: exact cue sets, interactivity, and serialization."""

import numpy as np
import pytest

from sepsisai.cues import CaseState, CueConfig, CueKind, OutcomeKind, RecommendationBasis
from sepsisai.interfaces import (
    EXPECTED_CUE_KINDS,
    INTERACTIVE_KINDS,
    InterfaceKind,
    case_state,
    compose_interface,
)
from sepsisai.plans import ALL_PLANS

from tests.conftest import make_index, neighbors_of

CFG = CueConfig()


def _case(n_features=2, pid=0):
    z = np.zeros(n_features)
    return CaseState(patient_id=pid, step_index=3, values_std=z,
                     missing=np.zeros(n_features, dtype=bool), values_raw=z.copy())


def _neighbors(plan_support: dict[int, tuple[int, int]], extra_unlabeled=0):
    codes, died, pressor = [], [], []
    for code, (support, events) in plan_support.items():
        codes += [code] * support
        died += [True] * events + [False] * (support - events)
        pressor += [True] * (support // 2) + [False] * (support - support // 2)
    codes += [-1] * extra_unlabeled
    died += [False] * extra_unlabeled
    pressor += [False] * extra_unlabeled
    rng = np.random.default_rng(0)
    idx = make_index(rng.normal(size=(len(codes), 2)), died=died, pressor12=pressor,
                     next_plan_codes=np.array(codes))
    return neighbors_of(idx)


RICH = {0: (30, 6), 5: (40, 22), 7: (20, 5), 11: (10, 9)}


def test_every_kind_emits_exactly_its_composition_table_set():
    nb = _neighbors(RICH)
    case = _case()
    for kind in InterfaceKind:
        plan = ALL_PLANS[5] if kind in INTERACTIVE_KINDS else None
        view = compose_interface(kind, case, nb, plan, CFG)
        kinds = frozenset(c.kind for c in view.cues)
        expected = EXPECTED_CUE_KINDS[kind]
        # interactive kinds may add R8 only under the significance condition
        assert expected <= kinds
        assert kinds - expected <= ({CueKind.R8} if kind in INTERACTIVE_KINDS
                                    else frozenset())
        assert view.interactive == (kind in INTERACTIVE_KINDS)


def test_case_features_contains_r1_and_r2_only():
    view = compose_interface(InterfaceKind.CASE_FEATURES, _case(), _neighbors(RICH),
                             None, CFG)
    assert [c.kind for c in view.cues] == [CueKind.R1, CueKind.R2]


def test_risk_interfaces_bind_their_outcomes():
    nb = _neighbors(RICH)
    treatment = compose_interface(InterfaceKind.TREATMENT_RISK, _case(), nb, None, CFG)
    mortality = compose_interface(InterfaceKind.MORTALITY_RISK, _case(), nb, None, CFG)
    assert treatment.cues[0].payload.outcome is OutcomeKind.PRESSOR_AFTER_12H
    assert mortality.cues[0].payload.outcome is OutcomeKind.MORTALITY


def test_recommendation_interface_has_r8_but_no_risk_cues():
    view = compose_interface(InterfaceKind.TREATMENT_RECOMMENDATION, _case(),
                             _neighbors(RICH), None, CFG)
    kinds = {c.kind for c in view.cues}
    assert CueKind.R8 in kinds
    assert CueKind.R3 not in kinds and CueKind.R4 not in kinds
    rec = view.cues[-1].payload
    assert rec.basis is RecommendationBasis.BEST_RISK


def test_prior_actions_recommends_most_frequent():
    view = compose_interface(InterfaceKind.PRIOR_CLINICIAN_ACTIONS, _case(),
                             _neighbors(RICH), None, CFG)
    rec = [c for c in view.cues if c.kind is CueKind.R8][0].payload
    assert rec.basis is RecommendationBasis.MOST_FREQUENT


def test_interactive_without_plan_is_an_error():
    for kind in INTERACTIVE_KINDS:
        with pytest.raises(ValueError):
            compose_interface(kind, _case(), _neighbors(RICH), None, CFG)


def test_non_interactive_ignores_selected_plan():
    view = compose_interface(InterfaceKind.TREATMENT_RISK, _case(), _neighbors(RICH),
                             ALL_PLANS[0], CFG)
    assert view.selected_plan is None


def test_interactive_low_support_plan_reports_insufficient_and_no_r8():
    nb = _neighbors({0: (8, 2), 5: (60, 30)})
    view = compose_interface(InterfaceKind.INTERACTIVE_TREATMENT_RISK, _case(), nb,
                             ALL_PLANS[0], CFG)
    kinds = [c.kind for c in view.cues]
    assert kinds == [CueKind.R7, CueKind.R5, CueKind.R3, CueKind.R4]
    r4 = view.cues[3].payload
    assert r4.insufficient_data and not r4.significant


def test_interactive_significantly_better_plan_adds_r8():
    # mortality 10/40 on the selected plan vs 30/60 without: significant, better
    nb = _neighbors({0: (40, 10), 5: (60, 30)})
    view = compose_interface(InterfaceKind.INTERACTIVE_MORTALITY_RISK, _case(), nb,
                             ALL_PLANS[0], CFG)
    kinds = [c.kind for c in view.cues]
    assert kinds == [CueKind.R7, CueKind.R5, CueKind.R3, CueKind.R4, CueKind.R8]
    assert view.cues[4].payload.plan == ALL_PLANS[0]


def test_interactive_significantly_worse_plan_omits_r8():
    nb = _neighbors({0: (60, 30), 5: (40, 10)})
    view = compose_interface(InterfaceKind.INTERACTIVE_MORTALITY_RISK, _case(), nb,
                             ALL_PLANS[0], CFG)
    assert CueKind.R8 not in {c.kind for c in view.cues}


def test_interactive_conditional_r3_counts_plan_takers_only():
    nb = _neighbors({0: (40, 10), 5: (60, 30)})
    view = compose_interface(InterfaceKind.INTERACTIVE_MORTALITY_RISK, _case(), nb,
                             ALL_PLANS[0], CFG)
    r3 = view.cues[2].payload
    assert (r3.numerator, r3.denominator) == (10, 40)


def test_repeat_composition_is_byte_identical():
    nb = _neighbors(RICH)
    case = _case()
    for kind in InterfaceKind:
        plan = ALL_PLANS[5] if kind in INTERACTIVE_KINDS else None
        a = compose_interface(kind, case, nb, plan, CFG).to_json()
        b = compose_interface(kind, case, nb, plan, CFG).to_json()
        assert a == b


def test_view_serialization_field_names():
    nb = _neighbors(RICH)
    view = compose_interface(InterfaceKind.INTERACTIVE_MORTALITY_RISK, _case(), nb,
                             ALL_PLANS[5], CFG).to_dict()
    assert set(view) == {"kind", "case_ref", "interactive", "selected_plan", "cues"}
    assert view["case_ref"] == {"patient_id": 0, "step": 3}
    by_kind = {c["kind"]: c for c in view["cues"]}
    r3 = by_kind["R3_RiskScore"]["payload"]
    assert set(r3) == {"outcome", "probability", "band", "numerator", "denominator"}
    r4 = by_kind["R4_DifferenceInRisk"]["payload"]
    assert {"plan", "risk_with_plan", "risk_without", "z_statistic", "p_value",
            "significant", "insufficient_data"} <= set(r4)
    freq = by_kind["R5_ActionFrequency"]["payload"]
    assert set(freq) == {"counts", "volume_marginals", "vasopressor_marginals", "total"}
    assert len(freq["counts"]) == 12
    for cue in view["cues"]:
        assert set(cue["provenance"]) == {"neighbor_count", "query_step"}


def test_case_features_payload_field_names():
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(50, 3))
    nb = neighbors_of(make_index(feats))
    case = CaseState(patient_id=1, step_index=0,
                     values_std=feats.mean(axis=0) + np.array([5.0, 0.0, 0.0]),
                     missing=np.zeros(3, dtype=bool),
                     values_raw=np.zeros(3))
    view = compose_interface(InterfaceKind.CASE_FEATURES, case, nb, None, CFG).to_dict()
    r2 = [c for c in view["cues"] if c["kind"] == "R2_UnusualFeatures"][0]
    assert r2["payload"], "expected at least one unusual feature"
    assert set(r2["payload"][0]) == {"feature", "case_value", "neighbor_mean",
                                     "neighbor_std", "score"}


def test_case_state_standardizes_against_model(model, split):
    p = split[1].patients[0]
    state = case_state(model, p, 0)
    ts = p.steps[0]
    expected = model.standardize(ts.values, ts.missing)
    assert np.array_equal(state.values_std, expected)
    assert np.array_equal(state.values_raw, ts.values)
    with pytest.raises(ValueError):
        case_state(model, p, len(p.steps))


def test_r2_list_sorted_by_score_descending():
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(60, 4))
    mu = feats.mean(axis=0)
    sigma = feats.std(axis=0)
    case_values = mu + np.array([3.0, 6.0, 0.0, 4.5]) * (sigma + 1e-9)
    case = CaseState(patient_id=1, step_index=0, values_std=case_values,
                     missing=np.zeros(4, dtype=bool), values_raw=case_values)
    view = compose_interface(InterfaceKind.CASE_FEATURES, case,
                             neighbors_of(make_index(feats)), None, CFG)
    r2 = view.cues[1].payload
    scores = [f.score for f in r2]
    assert scores == sorted(scores, reverse=True)
    assert [f.feature for f in r2] == ["f1", "f3", "f0"]
