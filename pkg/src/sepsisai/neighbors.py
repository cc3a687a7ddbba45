"""Exact nearest-neighbor retrieval over state embeddings.

Every (patient, step) of the evaluation cohort is embedded and stored with
its outcome labels and a standardized feature snapshot, so cue generation
needs no further cohort access. Queries exclude all states of the query's
own patient to keep a patient's future out of their own cues. `query` is the
vectorized production path; `brute_force_query` is a deliberately separate
pure-Python scan used as the correctness oracle.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .embedder import EmbedderModel, StateEmbedding, embed, model_fingerprint
from .errors import CheckpointError
from .plans import ALL_PLANS, PressorAction, TreatmentPlan

INDEX_MAGIC = b"RCNI"
INDEX_VERSION = 1

_PLAN_CODE = {plan: i for i, plan in enumerate(ALL_PLANS)}


@dataclass(frozen=True)
class IndexEntry:
    patient_id: int
    step_index: int
    died_in_admission: bool
    pressor_after_12h: bool
    next_plan: TreatmentPlan | None     # None for a trajectory's final step
    features_std: np.ndarray            # standardized current-step values


@dataclass
class NeighborIndex:
    embeddings: np.ndarray              # (n, embed_dim)
    patient_ids: np.ndarray             # (n,) int64
    step_indices: np.ndarray            # (n,) int64
    died: np.ndarray                    # (n,) bool
    pressor_after_12h: np.ndarray       # (n,) bool
    next_plan_codes: np.ndarray         # (n,) int64; -1 = no next step
    features_std: np.ndarray            # (n, n_features)
    feature_population_std: np.ndarray  # (n_features,) std over all entries
    feature_names: tuple[str, ...]
    feature_binary: np.ndarray          # (n_features,) bool
    feature_means: np.ndarray           # standardization stats frozen from the model
    feature_stds: np.ndarray
    model_fingerprint: str

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def entry(self, i: int) -> IndexEntry:
        code = int(self.next_plan_codes[i])
        return IndexEntry(
            patient_id=int(self.patient_ids[i]),
            step_index=int(self.step_indices[i]),
            died_in_admission=bool(self.died[i]),
            pressor_after_12h=bool(self.pressor_after_12h[i]),
            next_plan=ALL_PLANS[code] if code >= 0 else None,
            features_std=self.features_std[i],
        )

    @property
    def build_fingerprint(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.embeddings, self.patient_ids, self.step_indices,
                    self.died, self.pressor_after_12h, self.next_plan_codes,
                    self.features_std, self.feature_population_std,
                    self.feature_binary, self.feature_means, self.feature_stds):
            digest.update(np.ascontiguousarray(arr).tobytes())
        digest.update("\x00".join(self.feature_names).encode())
        digest.update(self.model_fingerprint.encode())
        return digest.hexdigest()


@dataclass(frozen=True)
class NeighborMember:
    entry_index: int
    distance: float


@dataclass(frozen=True)
class NeighborSet:
    query: StateEmbedding
    members: tuple[NeighborMember, ...]
    k: int
    index: NeighborIndex

    def __len__(self) -> int:
        return len(self.members)

    def entries(self) -> list[IndexEntry]:
        return [self.index.entry(m.entry_index) for m in self.members]


def build_index(eval_cohort: Cohort, model: EmbedderModel) -> NeighborIndex:
    """Embed and label every (patient, step) of the cohort."""
    if not eval_cohort.patients:
        raise ValueError("cohort is empty")
    vectors, pids, steps, died, pressor12, plans, feats = [], [], [], [], [], [], []
    for p in eval_cohort.patients:
        pressor_steps = [s.index for s in p.steps
                         if s.treatments_given.vasopressor is not PressorAction.NO_PRESSOR]
        for pos, step in enumerate(p.steps):
            vectors.append(embed(model, p, pos).vector)
            pids.append(p.patient_id)
            steps.append(step.index)
            died.append(p.died_in_admission)
            # "after 12 hours" is anchored to this decision point: a later step
            # qualifies when it starts more than 12 h after this one.
            pressor12.append(any(j - step.index > 3 for j in pressor_steps))
            if pos + 1 < len(p.steps):
                plans.append(_PLAN_CODE[p.steps[pos + 1].treatments_given])
            else:
                plans.append(-1)
            feats.append(model.standardize(step.values, step.missing))
    features = np.stack(feats)
    pop_std = features.std(axis=0)
    schema = eval_cohort.schema
    return NeighborIndex(
        embeddings=np.stack(vectors),
        patient_ids=np.asarray(pids, dtype=np.int64),
        step_indices=np.asarray(steps, dtype=np.int64),
        died=np.asarray(died, dtype=bool),
        pressor_after_12h=np.asarray(pressor12, dtype=bool),
        next_plan_codes=np.asarray(plans, dtype=np.int64),
        features_std=features,
        feature_population_std=pop_std,
        feature_names=tuple(schema.names),
        feature_binary=np.asarray(schema.binary_mask(), dtype=bool),
        feature_means=model.feature_means.copy(),
        feature_stds=model.feature_stds.copy(),
        model_fingerprint=model_fingerprint(model),
    )


def query(index: NeighborIndex, query_embedding: StateEmbedding, k: int = 100
          ) -> NeighborSet:
    """The k nearest entries by Euclidean distance, excluding the query's own
    patient; ties broken by (patient_id, step_index) ascending."""
    if k <= 0:
        raise ValueError("k must be positive")
    eligible = np.flatnonzero(index.patient_ids != query_embedding.patient_id)
    diffs = index.embeddings[eligible] - query_embedding.vector
    distances = np.sqrt((diffs ** 2).sum(axis=1))
    order = np.lexsort((index.step_indices[eligible], index.patient_ids[eligible],
                        distances))
    take = order[:min(k, eligible.size)]
    members = tuple(NeighborMember(int(eligible[i]), float(distances[i])) for i in take)
    return NeighborSet(query=query_embedding, members=members, k=k, index=index)


def brute_force_query(index: NeighborIndex, query_embedding: StateEmbedding,
                      k: int = 100) -> NeighborSet:
    """Pure-Python full scan with the same exclusion and tie rules; test oracle."""
    if k <= 0:
        raise ValueError("k must be positive")
    q = [float(v) for v in query_embedding.vector]
    scored = []
    for i in range(len(index)):
        if int(index.patient_ids[i]) == query_embedding.patient_id:
            continue
        row = index.embeddings[i]
        acc = 0.0
        for a, b in zip(row, q):
            diff = float(a) - b
            acc += diff * diff
        scored.append((math.sqrt(acc), int(index.patient_ids[i]),
                       int(index.step_indices[i]), i))
    scored.sort()
    members = tuple(NeighborMember(i, d) for d, _, _, i in scored[:k])
    return NeighborSet(query=query_embedding, members=members, k=k, index=index)


# ---------------------------------------------------------------------------
# Persistence

def save_index(index: NeighborIndex) -> bytes:
    header = json.dumps(
        {"n_entries": len(index), "embed_dim": index.embeddings.shape[1],
         "n_features": index.features_std.shape[1],
         "feature_names": list(index.feature_names),
         "model_fingerprint": index.model_fingerprint},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    blob = bytearray()
    blob += INDEX_MAGIC
    blob += struct.pack("<I", INDEX_VERSION)
    blob += struct.pack("<I", len(header))
    blob += header
    payload = [
        ("<f8", index.embeddings), ("<i8", index.patient_ids),
        ("<i8", index.step_indices), ("u1", index.died),
        ("u1", index.pressor_after_12h), ("<i8", index.next_plan_codes),
        ("<f8", index.features_std), ("<f8", index.feature_population_std),
        ("u1", index.feature_binary), ("<f8", index.feature_means),
        ("<f8", index.feature_stds),
    ]
    for dtype, arr in payload:
        data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        blob += struct.pack("<Q", len(data))
        blob += data
    return bytes(blob)


def load_index(blob: bytes, model: EmbedderModel) -> NeighborIndex:
    """Deserialize and verify the index was built with this exact model."""
    if blob[:4] != INDEX_MAGIC:
        raise CheckpointError("bad magic bytes: not a neighbor index")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != INDEX_VERSION:
        raise CheckpointError(f"unsupported index version {version}")
    (header_len,) = struct.unpack_from("<I", blob, 8)
    pos = 12
    header = json.loads(blob[pos:pos + header_len].decode("utf-8"))
    pos += header_len
    expected = model_fingerprint(model)
    if header["model_fingerprint"] != expected:
        raise CheckpointError("index was built with a different embedder checkpoint")

    raw = []
    for dtype in ("<f8", "<i8", "<i8", "u1", "u1", "<i8", "<f8", "<f8",
                  "u1", "<f8", "<f8"):
        (size,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        raw.append(np.frombuffer(blob[pos:pos + size], dtype=dtype).copy())
        pos += size
    n, e, f = header["n_entries"], header["embed_dim"], header["n_features"]
    return NeighborIndex(
        embeddings=raw[0].reshape(n, e),
        patient_ids=raw[1],
        step_indices=raw[2],
        died=raw[3].astype(bool),
        pressor_after_12h=raw[4].astype(bool),
        next_plan_codes=raw[5],
        features_std=raw[6].reshape(n, f),
        feature_population_std=raw[7],
        feature_names=tuple(header["feature_names"]),
        feature_binary=raw[8].astype(bool),
        feature_means=raw[9],
        feature_stds=raw[10],
        model_fingerprint=header["model_fingerprint"],
    )
