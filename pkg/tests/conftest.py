"""Shared fixtures: a small end-to-end artifact stack and synthetic-index builders."""

from __future__ import annotations

import numpy as np
import pytest

from sepsisai.cohort import filter_sepsis_cohort, split_train_eval
from sepsisai.embedder import EmbedderConfig, StateEmbedding, train
from sepsisai.neighbors import NeighborIndex, NeighborMember, NeighborSet, build_index
from sepsisai.plans import ALL_PLANS
from sepsisai.synth import GeneratorConfig, generate_cohort

SMALL_EMBEDDER = EmbedderConfig(window_steps=4, embed_dim=16, hidden_dim=32,
                                epochs=20, learning_rate=0.02, batch_size=64, seed=3)


@pytest.fixture(scope="session")
def small_cohort():
    return filter_sepsis_cohort(generate_cohort(GeneratorConfig(n_patients=160, seed=7)))


@pytest.fixture(scope="session")
def split(small_cohort):
    return split_train_eval(small_cohort, seed=1)


@pytest.fixture(scope="session")
def model(split):
    return train(split[0], SMALL_EMBEDDER)


@pytest.fixture(scope="session")
def index(split, model):
    return build_index(split[1], model)


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory, split, model, index):
    """A complete artifact directory: eval cohort, model, index, cases."""
    from sepsisai.bundle import (
        CASES_FILE, EVAL_FILE, INDEX_FILE, MODEL_FILE, StudyCase, save_cases_artifact,
    )
    from sepsisai.cohort import write_cohort
    from sepsisai.cues import CueConfig
    from sepsisai.embedder import save_model
    from sepsisai.neighbors import save_index
    from sepsisai.study import build_eligibility, select_complex_cases
    from sepsisai.synth import generate_vignette

    d = tmp_path_factory.mktemp("study_data")
    with open(d / EVAL_FILE, "w", encoding="utf-8") as fh:
        write_cohort(split[1], fh)
    (d / MODEL_FILE).write_bytes(save_model(model))
    (d / INDEX_FILE).write_bytes(save_index(index))
    cfg = CueConfig()
    selection = select_complex_cases(split[1], index, model, 4, cfg)
    cases = []
    for ref in selection.refs:
        v = generate_vignette(split[1].patient(ref.patient_id), seed=0, step=ref.step)
        cases.append(StudyCase(ref=ref, pseudonym=v.pseudonym, profile=v.profile,
                               complicating_factors=v.complicating_factors, text=v.text))
    eligibility = build_eligibility(selection.refs, split[1], index, model, cfg)
    save_cases_artifact(d / CASES_FILE, cases, eligibility, selection.shortfall)
    return d


def make_index(features_std: np.ndarray, died=None, pressor12=None,
               next_plan_codes=None, patient_ids=None, binary_mask=None,
               names=None, means=None, stds=None, pop_std=None) -> NeighborIndex:
    """Hand-built index for cue tests; embeddings are placeholders."""
    n, f = features_std.shape
    if patient_ids is None:
        patient_ids = np.arange(1, n + 1)
    return NeighborIndex(
        embeddings=np.zeros((n, 2)),
        patient_ids=np.asarray(patient_ids, dtype=np.int64),
        step_indices=np.zeros(n, dtype=np.int64),
        died=np.zeros(n, dtype=bool) if died is None else np.asarray(died, dtype=bool),
        pressor_after_12h=(np.zeros(n, dtype=bool) if pressor12 is None
                           else np.asarray(pressor12, dtype=bool)),
        next_plan_codes=(np.full(n, -1, dtype=np.int64) if next_plan_codes is None
                         else np.asarray(next_plan_codes, dtype=np.int64)),
        features_std=features_std.astype(float),
        feature_population_std=(np.ones(f) if pop_std is None
                                else np.asarray(pop_std, dtype=float)),
        feature_names=tuple(names) if names else tuple(f"f{j}" for j in range(f)),
        feature_binary=(np.zeros(f, dtype=bool) if binary_mask is None
                        else np.asarray(binary_mask, dtype=bool)),
        feature_means=np.zeros(f) if means is None else np.asarray(means, dtype=float),
        feature_stds=np.ones(f) if stds is None else np.asarray(stds, dtype=float),
        model_fingerprint="test",
    )


def neighbors_of(index: NeighborIndex, query_patient: int = 0) -> NeighborSet:
    """A NeighborSet over every entry of `index`, in entry order."""
    members = tuple(NeighborMember(i, float(i)) for i in range(len(index)))
    return NeighborSet(
        query=StateEmbedding(patient_id=query_patient, step_index=0,
                             vector=np.zeros(index.embeddings.shape[1])),
        members=members, k=len(index), index=index,
    )


def plan_code(volume: str, vasopressor: str) -> int:
    for i, plan in enumerate(ALL_PLANS):
        if plan.volume.value == volume and plan.vasopressor.value == vasopressor:
            return i
    raise KeyError((volume, vasopressor))
