"""Regenerate the UI test fixtures from real server payloads.

Runs a small synthetic pipeline in-process and dumps one InterfaceView JSON
per interface kind (plus the insufficient-data, significant-difference,
no-consensus, and no-recommendation states), a case detail payload, and a
session payload into frontend/tests/fixtures/.

Usage: python3 frontend/tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from sepsisai.bundle import StudyBundle, StudyCase, save_cases_artifact
from sepsisai.bundle import CASES_FILE, EVAL_FILE, INDEX_FILE, MODEL_FILE
from sepsisai.cohort import filter_sepsis_cohort, split_train_eval, write_cohort
from sepsisai.cues import CaseState, CueConfig
from sepsisai.embedder import EmbedderConfig, save_model, train
from sepsisai.interfaces import INTERACTIVE_KINDS, InterfaceKind, compose_interface
from sepsisai.neighbors import (
    NeighborIndex,
    NeighborMember,
    NeighborSet,
    build_index,
    save_index,
)
from sepsisai.embedder import StateEmbedding
from sepsisai.plans import ALL_PLANS, TreatmentPlan, VolumeAction, PressorAction
from sepsisai.study import build_eligibility, create_session, select_complex_cases
from sepsisai.synth import GeneratorConfig, generate_cohort, generate_vignette

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
CFG = CueConfig()


def synthetic_neighbors(plan_support: dict[int, tuple[int, int]]) -> NeighborSet:
    codes, died, pressor = [], [], []
    for code, (support, events) in plan_support.items():
        codes += [code] * support
        died += [True] * events + [False] * (support - events)
        pressor += [True] * (support // 3) + [False] * (support - support // 3)
    n = len(codes)
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(n, 4)).round(3)
    index = NeighborIndex(
        embeddings=np.zeros((n, 2)),
        patient_ids=np.arange(1, n + 1),
        step_indices=np.zeros(n, dtype=np.int64),
        died=np.asarray(died), pressor_after_12h=np.asarray(pressor),
        next_plan_codes=np.asarray(codes, dtype=np.int64),
        features_std=feats,
        feature_population_std=np.ones(4),
        feature_names=("lactate", "mean_arterial_pressure", "creatinine",
                       "history_heart_failure"),
        feature_binary=np.array([False, False, False, True]),
        feature_means=np.array([1.2, 82.0, 0.9, 0.0]),
        feature_stds=np.array([0.8, 12.0, 0.4, 1.0]),
        model_fingerprint="fixture",
    )
    members = tuple(NeighborMember(i, round(0.01 * i, 4)) for i in range(n))
    return NeighborSet(query=StateEmbedding(0, 3, np.zeros(2)), members=members,
                       k=n, index=index)


def fixture_case(values) -> CaseState:
    values = np.asarray(values, dtype=float)
    return CaseState(patient_id=42, step_index=3, values_std=values,
                     missing=np.zeros(4, dtype=bool), values_raw=values)


def dump(name: str, payload: dict):
    (OUT / f"{name}.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    print(f"wrote {name}.json")


def interface_fixtures():
    rich = synthetic_neighbors({0: (30, 6), 5: (40, 22), 7: (20, 5), 11: (10, 9)})
    unusual_case = fixture_case([4.0, -3.2, 2.8, 1.0])

    for kind in InterfaceKind:
        plan = ALL_PLANS[5] if kind in INTERACTIVE_KINDS else None
        view = compose_interface(kind, unusual_case, rich, plan, CFG)
        dump(_snake(kind.value), view.to_dict())

    significant = synthetic_neighbors({0: (40, 10), 5: (60, 30)})
    dump("interactive_mortality_risk_significant", compose_interface(
        InterfaceKind.INTERACTIVE_MORTALITY_RISK, unusual_case, significant,
        ALL_PLANS[0], CFG).to_dict())

    sparse = synthetic_neighbors({0: (8, 2), 5: (60, 30)})
    dump("interactive_treatment_risk_insufficient", compose_interface(
        InterfaceKind.INTERACTIVE_TREATMENT_RISK, unusual_case, sparse,
        ALL_PLANS[0], CFG).to_dict())

    split_votes = synthetic_neighbors({0: (30, 5), 5: (30, 10), 7: (40, 12)})
    dump("prior_clinician_actions_no_consensus", compose_interface(
        InterfaceKind.PRIOR_CLINICIAN_ACTIONS, unusual_case, split_votes, None,
        CFG).to_dict())

    thin = synthetic_neighbors({0: (8, 2), 5: (9, 3), 11: (7, 1)})
    dump("treatment_recommendation_none", compose_interface(
        InterfaceKind.TREATMENT_RECOMMENDATION, unusual_case, thin, None,
        CFG).to_dict())


def _snake(kind: str) -> str:
    out = []
    for i, ch in enumerate(kind):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def pipeline_fixtures(tmp: Path):
    cohort = filter_sepsis_cohort(generate_cohort(GeneratorConfig(n_patients=120, seed=7)))
    train_half, eval_half = split_train_eval(cohort, seed=1)
    model = train(train_half, EmbedderConfig(window_steps=4, embed_dim=16,
                                             hidden_dim=32, epochs=10,
                                             learning_rate=0.02, batch_size=64, seed=3))
    index = build_index(eval_half, model)
    selection = select_complex_cases(eval_half, index, model, 4, CFG)
    cases = []
    for ref in selection.refs:
        v = generate_vignette(eval_half.patient(ref.patient_id), seed=0, step=ref.step)
        cases.append(StudyCase(ref=ref, pseudonym=v.pseudonym, profile=v.profile,
                               complicating_factors=v.complicating_factors, text=v.text))
    eligibility = build_eligibility(selection.refs, eval_half, index, model, CFG)

    tmp.mkdir(parents=True, exist_ok=True)
    with open(tmp / EVAL_FILE, "w", encoding="utf-8") as fh:
        write_cohort(eval_half, fh)
    (tmp / MODEL_FILE).write_bytes(save_model(model))
    (tmp / INDEX_FILE).write_bytes(save_index(index))
    save_cases_artifact(tmp / CASES_FILE, cases, eligibility, selection.shortfall)
    bundle = StudyBundle.load(tmp)

    first = bundle.cases[0]
    dump("case_detail", bundle.case_detail(first.ref.patient_id))
    dump("case_list", {"cases": [
        {"id": c.ref.patient_id, "pseudonym": c.pseudonym, "step": c.ref.step}
        for c in bundle.cases
    ]})
    session = create_session("fixture-participant", tuple(c.ref for c in bundle.cases),
                             bundle.eligibility, seed=4)
    dump("session", session.to_dict())


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    interface_fixtures()
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        pipeline_fixtures(Path(tmp))


if __name__ == "__main__":
    main()
