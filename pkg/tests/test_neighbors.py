"""Exact kNN retrieval, labels, the brute-force oracle, and persistence."""

import numpy as np
import pytest

from sepsisai.cohort import Cohort, PatientTrajectory, Timestep
from sepsisai.embedder import EmbedderConfig, StateEmbedding, initialize_model, embed
from sepsisai.errors import CheckpointError
from sepsisai.neighbors import (
    build_index,
    brute_force_query,
    load_index,
    query,
    save_index,
)
from sepsisai.plans import (
    ALL_PLANS,
    NO_TREATMENT,
    PressorAction,
    TreatmentPlan,
    VolumeAction,
)
from sepsisai.schema import Feature, FeatureKind, FeatureSchema, OrganSystem

_SCHEMA3 = FeatureSchema(features=tuple(
    Feature(f"f{j}", FeatureKind.NUMERIC, "u", (0.0, 1.0), OrganSystem.CARDIAC)
    for j in range(3)
))


def _trajectory(pid, n_steps, pressor_steps=(), died=False, plans=None):
    steps = []
    for k in range(n_steps):
        plan = plans[k] if plans else TreatmentPlan(
            VolumeAction.NO_VOLUME,
            PressorAction.SINGLE_PRESSOR if k in pressor_steps else PressorAction.NO_PRESSOR,
        )
        steps.append(Timestep(index=k, values=np.full(3, float(pid + k)),
                              missing=np.zeros(3, dtype=bool), treatments_given=plan))
    return PatientTrajectory(patient_id=pid, age_band="60s", sex="female",
                             diagnosis_history=frozenset(), steps=tuple(steps),
                             antibiotic_times=(1.0,), culture_times=(2.0,),
                             died_in_admission=died, stay_hours=4.0 * n_steps)


def _model():
    return initialize_model(
        EmbedderConfig(window_steps=2, embed_dim=4, hidden_dim=8, seed=0), 3)


def test_index_has_one_entry_per_state():
    cohort = Cohort(schema=_SCHEMA3,
                    patients=tuple(_trajectory(i, 4) for i in (1, 2, 3)))
    idx = build_index(cohort, _model())
    assert len(idx) == 12


def test_pressor_label_anchors_to_the_decision_point():
    # pressor at step 2 (= +8 h after step 0) does not count; +16 h does
    cohort = Cohort(schema=_SCHEMA3, patients=(_trajectory(1, 6, pressor_steps=(2,)),
                                               _trajectory(2, 6, pressor_steps=(4,))))
    idx = build_index(cohort, _model())
    by_state = {(int(idx.patient_ids[i]), int(idx.step_indices[i])): bool(idx.pressor_after_12h[i])
                for i in range(len(idx))}
    assert by_state[(1, 0)] is False         # +8 h is not "after 12 hours"
    assert by_state[(2, 0)] is True          # +16 h is
    assert by_state[(2, 1)] is False         # +12 h exactly is not strictly after
    assert by_state[(2, 3)] is False


def test_next_plan_is_next_step_treatment_and_absent_on_final_step():
    plans = [ALL_PLANS[0], ALL_PLANS[5], ALL_PLANS[7]]
    cohort = Cohort(schema=_SCHEMA3, patients=(_trajectory(1, 3, plans=plans),))
    idx = build_index(cohort, _model())
    assert idx.entry(0).next_plan == ALL_PLANS[5]
    assert idx.entry(1).next_plan == ALL_PLANS[7]
    assert idx.entry(2).next_plan is None


def test_build_fingerprint_is_deterministic():
    cohort = Cohort(schema=_SCHEMA3,
                    patients=tuple(_trajectory(i, 3) for i in (1, 2)))
    a = build_index(cohort, _model()).build_fingerprint
    b = build_index(cohort, _model()).build_fingerprint
    assert a == b


def test_empty_cohort_rejected():
    with pytest.raises(ValueError):
        build_index(Cohort(schema=_SCHEMA3, patients=()), _model())


# ---------------------------------------------------------------------------
# query semantics

def _embedding(pid, vector):
    return StateEmbedding(patient_id=pid, step_index=0,
                          vector=np.asarray(vector, dtype=float))


def test_query_excludes_every_state_of_the_query_patient():
    cohort = Cohort(schema=_SCHEMA3, patients=(_trajectory(1, 4),))
    idx = build_index(cohort, _model())
    result = query(idx, embed(_model(), cohort.patients[0], 0), k=10)
    assert len(result) == 0


def test_query_orders_by_distance(index):
    emb = _embedding(0, index.embeddings[0])
    result = query(index, emb, k=25)
    distances = [m.distance for m in result.members]
    assert distances == sorted(distances)
    assert len(result) == 25


def test_query_tie_break_by_patient_then_step(model):
    # two distinct patients with identical feature windows -> identical vectors
    a = _trajectory(1, 2)
    b = _trajectory(2, 2)
    b = PatientTrajectory(**{**b.__dict__, "steps": a.steps})
    far = _trajectory(9, 2)
    cohort = Cohort(schema=_SCHEMA3, patients=(a, b, far))
    idx = build_index(cohort, _model())
    probe = embed(_model(), a, 1)
    result = query(idx, _embedding(99, probe.vector), k=4)
    entries = [(e.patient_id, e.step_index) for e in result.entries()]
    tied = [pair for pair in entries if pair[0] in (1, 2)]
    assert tied == sorted(tied)


def test_query_k_validation(index):
    emb = _embedding(0, index.embeddings[0])
    with pytest.raises(ValueError):
        query(index, emb, k=0)
    with pytest.raises(ValueError):
        brute_force_query(index, emb, k=-1)


def test_query_k_larger_than_eligible_returns_all(index):
    pid = int(index.patient_ids[0])
    emb = _embedding(pid, index.embeddings[0])
    eligible = int((index.patient_ids != pid).sum())
    result = query(index, emb, k=10 ** 9)
    assert len(result) == eligible


def test_brute_force_base_case():
    cohort = Cohort(schema=_SCHEMA3, patients=(_trajectory(1, 1), _trajectory(2, 1)))
    idx = build_index(cohort, _model())
    probe = _embedding(99, idx.embeddings[0])
    got = brute_force_query(idx, probe, k=1)
    assert got.entries()[0].patient_id == 1


def test_query_matches_brute_force_oracle(index):
    rng = np.random.default_rng(0)
    dim = index.embeddings.shape[1]
    patient_ids = np.unique(index.patient_ids)
    for trial in range(25):
        vec = rng.normal(size=dim)
        vec /= np.linalg.norm(vec)
        pid = int(patient_ids[trial % len(patient_ids)])
        emb = _embedding(pid, vec)
        fast = query(index, emb, k=100)
        slow = brute_force_query(index, emb, k=100)
        assert [m.entry_index for m in fast.members] == [m.entry_index for m in slow.members]
        assert max(abs(a.distance - b.distance)
                   for a, b in zip(fast.members, slow.members)) <= 1e-12
        assert all(e.patient_id != pid for e in fast.entries())


def test_query_is_read_only(index):
    before = index.build_fingerprint
    emb = _embedding(0, index.embeddings[3])
    for _ in range(5):
        query(index, emb, k=50)
        brute_force_query(index, emb, k=10)
    assert index.build_fingerprint == before


# ---------------------------------------------------------------------------
# persistence

def test_index_round_trip_is_bit_exact(index, model):
    blob = save_index(index)
    assert blob[:4] == b"RCNI"
    again = load_index(blob, model)
    assert save_index(again) == blob
    assert again.build_fingerprint == index.build_fingerprint


def test_index_load_verifies_model_fingerprint(index):
    blob = save_index(index)
    other = _model()
    with pytest.raises(CheckpointError):
        load_index(blob, other)


def test_index_load_rejects_bad_magic(index, model):
    blob = save_index(index)
    with pytest.raises(CheckpointError):
        load_index(b"ZZZZ" + blob[4:], model)
