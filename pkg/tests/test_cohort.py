"""Cohort data model, file format, and pipeline operations."""

import io
import json
from dataclasses import replace

import numpy as np
import pytest

from sepsisai.cohort import (
    Cohort,
    PatientTrajectory,
    Timestep,
    drop_post_cmo,
    filter_sepsis_cohort,
    nearest_rank_percentile,
    parse_cohort,
    split_train_eval,
    truncate_long_stays,
    write_cohort,
)
from sepsisai.errors import DuplicateRecordError, ParseError, SchemaError
from sepsisai.plans import NO_TREATMENT, PressorAction, TreatmentPlan, VolumeAction
from sepsisai.schema import DEFAULT_SCHEMA, Feature, FeatureKind, FeatureSchema, OrganSystem
from sepsisai.synth import GeneratorConfig, generate_cohort

TINY = FeatureSchema(features=(
    Feature("heart_rate", FeatureKind.NUMERIC, "bpm", (60.0, 100.0), OrganSystem.CARDIAC),
    Feature("lactate", FeatureKind.NUMERIC, "mmol/L", (0.5, 2.0), OrganSystem.METABOLIC),
    Feature("history_copd", FeatureKind.BINARY, "", None, OrganSystem.RESPIRATORY),
))


def meta(pid, abx=(2.0,), cult=(5.0,), died=False, flags=(), stay=None, sex="female"):
    rec = {"patient_id": pid, "antibiotic_times": list(abx), "culture_times": list(cult),
           "died_in_admission": died, "age_band": "60s", "sex": sex,
           "history_flags": list(flags)}
    if stay is not None:
        rec["stay_hours"] = stay
    return rec


def row(pid, t, feature=None, value=None, missing=False, vol=0.0, pressors=0, cmo=False):
    return {"patient_id": pid, "step_hours_start": t, "feature": feature,
            "value": value, "missing": missing, "treatment_volume": vol,
            "treatment_pressor": pressors, "on_cmo": cmo}


def stream(*records):
    return io.StringIO("schema_version=1\n" + "\n".join(json.dumps(r) for r in records) + "\n")


def parse(*records, schema=TINY):
    return parse_cohort(stream(*records), schema)


# ---------------------------------------------------------------------------
# parse_cohort

def test_parse_groups_rows_by_patient():
    c = parse(meta(7), row(7, 0.0, "heart_rate", 80.0), row(7, 4.0, "heart_rate", 90.0))
    assert len(c) == 1
    p = c.patient(7)
    assert [s.index for s in p.steps] == [0, 1]
    assert p.steps[0].values[0] == 80.0 and p.steps[1].values[0] == 90.0


def test_parse_unknown_feature_is_schema_error():
    with pytest.raises(SchemaError):
        parse(meta(7), row(7, 0.0, "xyz", 1.0))


def test_parse_out_of_order_rows_are_sorted():
    c = parse(meta(7), row(7, 4.0, "heart_rate", 90.0), row(7, 0.0, "heart_rate", 80.0))
    assert [s.index for s in c.patient(7).steps] == [0, 1]
    assert c.patient(7).steps[0].values[0] == 80.0


def test_parse_malformed_row_carries_line_number():
    source = io.StringIO("schema_version=1\n" + json.dumps(meta(7)) + "\n{not json\n")
    with pytest.raises(ParseError) as err:
        parse_cohort(source, TINY)
    assert err.value.line_number == 3


def test_parse_missing_header_is_parse_error():
    with pytest.raises(ParseError):
        parse_cohort(io.StringIO(json.dumps(meta(7)) + "\n"), TINY)


def test_parse_duplicate_observation_is_duplicate_error():
    with pytest.raises(DuplicateRecordError):
        parse(meta(7), row(7, 1.0, "heart_rate", 80.0), row(7, 1.0, "heart_rate", 81.0))


def test_parse_duplicate_metadata_is_duplicate_error():
    with pytest.raises(DuplicateRecordError):
        parse(meta(7), meta(7))


def test_parse_binary_feature_rejects_non_boolean():
    with pytest.raises(SchemaError):
        parse(meta(7), row(7, 0.0, "history_copd", 0.7))


def test_parse_requires_metadata_record():
    with pytest.raises(SchemaError):
        parse(row(7, 0.0, "heart_rate", 80.0))


def test_last_value_in_bin_wins():
    c = parse(meta(7), row(7, 1.0, "heart_rate", 70.0), row(7, 3.0, "heart_rate", 95.0))
    assert c.patient(7).steps[0].values[0] == 95.0


def test_locf_and_missing_flags():
    c = parse(
        meta(7),
        row(7, 0.0, "heart_rate", 80.0),
        row(7, 9.0, "lactate", 3.0),     # lactate first seen in bin 2
    )
    p = c.patient(7)
    assert [s.index for s in p.steps] == [0, 1, 2]
    hr, lac = 0, 1
    assert [s.values[hr] for s in p.steps] == [80.0, 80.0, 80.0]       # carried forward
    assert [bool(s.missing[hr]) for s in p.steps] == [False, False, False]
    assert [bool(s.missing[lac]) for s in p.steps] == [True, True, False]
    assert p.steps[0].values[lac] == 0.0                                # placeholder until seen


def test_history_flags_populate_binary_features():
    c = parse(meta(7, flags=("history_copd",)), row(7, 0.0, "heart_rate", 80.0))
    p = c.patient(7)
    assert p.diagnosis_history == frozenset({"history_copd"})
    assert all(s.values[2] == 1.0 and not s.missing[2] for s in p.steps)


def test_unknown_history_flag_is_schema_error():
    with pytest.raises(SchemaError):
        parse(meta(7, flags=("history_zzz",)), row(7, 0.0, "heart_rate", 80.0))


def test_volume_sums_within_bin():
    c = parse(meta(7), row(7, 0.5, vol=600.0), row(7, 2.5, vol=600.0),
              row(7, 0.0, "heart_rate", 80.0))
    assert c.patient(7).steps[0].treatments_given.volume is VolumeAction.HIGH_FLUIDS


def test_volume_low_fluids_boundary_is_inclusive():
    c = parse(meta(7), row(7, 0.0, "heart_rate", 80.0, vol=1000.0))
    assert c.patient(7).steps[0].treatments_given.volume is VolumeAction.LOW_FLUIDS


def test_diuretics_beat_smaller_fluid_volume():
    c = parse(meta(7), row(7, 0.0, vol=400.0), row(7, 1.0, vol=-500.0),
              row(7, 0.0, "heart_rate", 80.0))
    assert c.patient(7).steps[0].treatments_given.volume is VolumeAction.DIURETICS


def test_fluids_win_volume_tie():
    c = parse(meta(7), row(7, 0.0, vol=500.0), row(7, 1.0, vol=-500.0),
              row(7, 0.0, "heart_rate", 80.0))
    assert c.patient(7).steps[0].treatments_given.volume is VolumeAction.LOW_FLUIDS


def test_pressor_count_max_in_bin_and_cmo_or():
    c = parse(meta(7), row(7, 0.0, "heart_rate", 80.0, pressors=1),
              row(7, 2.0, pressors=2, cmo=True))
    step = c.patient(7).steps[0]
    assert step.treatments_given.vasopressor is PressorAction.MULTIPLE_PRESSORS
    assert step.on_cmo


def test_step_indices_consecutive_even_with_gaps():
    c = parse(meta(7), row(7, 0.0, "heart_rate", 80.0), row(7, 17.0, "heart_rate", 85.0))
    assert [s.index for s in c.patient(7).steps] == [0, 1, 2, 3, 4]


def test_stay_hours_prefers_metadata_over_max_event_time():
    c = parse(meta(7, stay=30.0), row(7, 0.0, "heart_rate", 80.0))
    assert c.patient(7).stay_hours == 30.0


# ---------------------------------------------------------------------------
# filter_sepsis_cohort

def _traj(pid, n_steps=4, stay=None, abx=(10.0,), cult=(20.0,), cmo_at=None,
          died=False, schema=TINY):
    steps = tuple(
        Timestep(index=k, values=np.zeros(len(schema)),
                 missing=np.zeros(len(schema), dtype=bool),
                 treatments_given=NO_TREATMENT,
                 on_cmo=cmo_at is not None and k >= cmo_at)
        for k in range(n_steps)
    )
    return PatientTrajectory(
        patient_id=pid, age_band="60s", sex="female", diagnosis_history=frozenset(),
        steps=steps, antibiotic_times=tuple(abx), culture_times=tuple(cult),
        died_in_admission=died, stay_hours=stay if stay is not None else 4.0 * n_steps,
    )


def _cohort(*patients, schema=TINY):
    return Cohort(schema=schema, patients=tuple(patients))


def test_filter_retains_close_pair_and_long_stay():
    c = _cohort(_traj(1, stay=48.0, abx=(10.0,), cult=(20.0,)))
    assert len(filter_sepsis_cohort(c)) == 1


def test_filter_excludes_pair_wider_than_24h():
    c = _cohort(_traj(1, stay=48.0, abx=(0.0,), cult=(30.0,)))
    assert len(filter_sepsis_cohort(c)) == 0


def test_filter_window_is_closed_at_24h():
    c = _cohort(_traj(1, stay=48.0, abx=(0.0,), cult=(24.0,)))
    assert len(filter_sepsis_cohort(c)) == 1


def test_filter_excludes_short_stay():
    c = _cohort(_traj(1, n_steps=2, stay=8.0, abx=(1.0,), cult=(2.0,)))
    assert len(filter_sepsis_cohort(c)) == 0


def test_filter_requires_some_pair_not_all():
    c = _cohort(_traj(1, stay=48.0, abx=(0.0, 40.0), cult=(70.0, 40.5)))
    assert len(filter_sepsis_cohort(c)) == 1


def test_filter_rescan_property_on_generated_cohort():
    cohort = generate_cohort(GeneratorConfig(n_patients=300, seed=11))
    kept = filter_sepsis_cohort(cohort)
    for p in kept.patients:
        closest = min(abs(a - c) for a in p.antibiotic_times for c in p.culture_times)
        assert closest <= 24.0 and p.stay_hours >= 12.0
    assert len(kept) / len(cohort) >= 0.95


# ---------------------------------------------------------------------------
# truncate_long_stays

def test_nearest_rank_percentile_definition():
    stays = [float(d) for d in range(1, 101)]
    assert nearest_rank_percentile(stays, 0.95) == 95.0


def test_truncate_cutoff_from_nearest_rank_of_days():
    patients = [_traj(i, n_steps=1, stay=10 * 24.0) for i in range(1, 95)]
    patients += [_traj(i, n_steps=1, stay=17 * 24.0) for i in range(95, 100)]
    patients.append(_traj(100, n_steps=20 * 6, stay=20 * 24.0))
    out = truncate_long_stays(_cohort(*patients), 0.95)
    long_patient = out.patient(100)
    # cutoff = 17 days = 408 h; steps starting at or past it are dropped
    assert len(long_patient.steps) == 102
    assert long_patient.stay_hours == 408.0


def test_truncate_noop_when_all_below_cutoff():
    c = _cohort(_traj(1, n_steps=3, stay=12.0), _traj(2, n_steps=4, stay=16.0))
    out = truncate_long_stays(c, 0.95)
    assert [len(p.steps) for p in out.patients] == [3, 4]
    assert [p.stay_hours for p in out.patients] == [12.0, 16.0]


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.2])
def test_truncate_rejects_bad_percentile(bad):
    with pytest.raises(ValueError):
        truncate_long_stays(_cohort(_traj(1)), bad)


def test_truncate_rejects_empty_cohort():
    with pytest.raises(ValueError):
        truncate_long_stays(_cohort(), 0.95)


# ---------------------------------------------------------------------------
# drop_post_cmo

def test_drop_post_cmo_removes_from_first_cmo_step():
    p = _traj(1, n_steps=4, cmo_at=2)
    out = drop_post_cmo(p)
    assert [s.index for s in out.steps] == [0, 1]
    assert not any(s.on_cmo for s in out.steps)


def test_drop_post_cmo_noop_without_cmo():
    p = _traj(1, n_steps=4)
    assert drop_post_cmo(p) is p


def test_drop_post_cmo_at_step_zero_empties_then_filter_drops():
    p = drop_post_cmo(_traj(1, n_steps=4, cmo_at=0, abx=(1.0,), cult=(2.0,)))
    assert p.steps == ()
    assert len(filter_sepsis_cohort(_cohort(p))) == 0


# ---------------------------------------------------------------------------
# split_train_eval

def test_split_sizes_even():
    c = _cohort(*[_traj(i) for i in range(1, 11)])
    train, evaluation = split_train_eval(c, seed=5)
    assert (len(train), len(evaluation)) == (5, 5)
    assert not set(p.patient_id for p in train.patients) & set(
        p.patient_id for p in evaluation.patients)


def test_split_sizes_odd_takes_ceiling_for_train():
    c = _cohort(*[_traj(i) for i in range(1, 12)])
    train, evaluation = split_train_eval(c, seed=5)
    assert (len(train), len(evaluation)) == (6, 5)


def test_split_is_deterministic_and_exhaustive():
    c = _cohort(*[_traj(i) for i in range(1, 11)])
    a = split_train_eval(c, seed=9)
    b = split_train_eval(c, seed=9)
    ids = lambda half: [p.patient_id for p in half.patients]
    assert ids(a[0]) == ids(b[0]) and ids(a[1]) == ids(b[1])
    assert sorted(ids(a[0]) + ids(a[1])) == list(range(1, 11))


def test_split_independent_of_input_order():
    patients = [_traj(i) for i in range(1, 11)]
    forward = split_train_eval(_cohort(*patients), seed=9)
    backward = split_train_eval(_cohort(*reversed(patients)), seed=9)
    assert [p.patient_id for p in forward[0].patients] == \
           [p.patient_id for p in backward[0].patients]


def test_split_requires_two_patients():
    with pytest.raises(ValueError):
        split_train_eval(_cohort(_traj(1)), seed=0)


# ---------------------------------------------------------------------------
# Cohort invariants and the file round trip

def test_cohort_rejects_duplicate_patient_ids():
    with pytest.raises(ValueError):
        _cohort(_traj(1), _traj(1))


def test_cohort_rejects_schema_mismatch():
    bad = _traj(1, schema=DEFAULT_SCHEMA)
    with pytest.raises(ValueError):
        Cohort(schema=TINY, patients=(bad,))


def test_write_parse_round_trip_exact():
    cohort = generate_cohort(GeneratorConfig(n_patients=30, seed=5))
    buf = io.StringIO()
    write_cohort(cohort, buf)
    buf.seek(0)
    again = parse_cohort(buf, DEFAULT_SCHEMA, provenance="synthetic")
    assert len(again) == len(cohort)
    for p, q in zip(cohort.patients, again.patients):
        assert p.patient_id == q.patient_id
        assert p.stay_hours == q.stay_hours
        assert p.antibiotic_times == q.antibiotic_times
        assert p.culture_times == q.culture_times
        assert p.died_in_admission == q.died_in_admission
        assert p.diagnosis_history == q.diagnosis_history
        assert np.array_equal(p.values_matrix(), q.values_matrix())
        assert np.array_equal(p.missing_matrix(), q.missing_matrix())
        assert [s.treatments_given for s in p.steps] == [s.treatments_given for s in q.steps]
        assert [s.on_cmo for s in p.steps] == [s.on_cmo for s in q.steps]
