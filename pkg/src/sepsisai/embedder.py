"""Denoising-autoencoder state embedder.

A two-layer tanh encoder maps a flattened, standardized feature window
(values plus per-cell missing flags) to a unit-norm embedding; a mirrored
decoder reconstructs the uncorrupted window. Corruption masks cells to the
standardized mean (zero). Training is plain momentum SGD in a fixed, seeded
batch order so runs are bitwise reproducible; gradients are hand-written so
they can be checked against central finite differences.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, PatientTrajectory
from .errors import CheckpointError, DivergenceError

MAGIC = b"RCEM"
CHECKPOINT_VERSION = 1
MOMENTUM = 0.9


@dataclass(frozen=True)
class EmbedderConfig:
    window_steps: int = 6           # 24 h of context
    embed_dim: int = 32
    hidden_dim: int = 64
    corruption_rate: float = 0.15
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.corruption_rate <= 1.0:
            raise ValueError("corruption_rate must be in [0, 1]")
        if self.embed_dim > self.hidden_dim:
            raise ValueError("embed_dim must not exceed hidden_dim")
        for name in ("window_steps", "embed_dim", "hidden_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def to_dict(self) -> dict:
        return {
            "window_steps": self.window_steps, "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim, "corruption_rate": self.corruption_rate,
            "learning_rate": self.learning_rate, "epochs": self.epochs,
            "batch_size": self.batch_size, "seed": self.seed,
        }


@dataclass(frozen=True)
class StateEmbedding:
    patient_id: int
    step_index: int
    vector: np.ndarray


@dataclass
class EmbedderModel:
    config: EmbedderConfig
    n_features: int
    feature_means: np.ndarray       # (F,) training-cohort means (non-missing cells)
    feature_stds: np.ndarray        # (F,) stds; zero-variance features get 1.0
    parameters: np.ndarray          # flat float64 vector
    loss_history: list[float] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return 2 * self.config.window_steps * self.n_features

    @property
    def output_dim(self) -> int:
        return self.config.window_steps * self.n_features

    def _views(self):
        cfg = self.config
        d, h, e, o = self.input_dim, cfg.hidden_dim, cfg.embed_dim, self.output_dim
        shapes = [("W1", (h, d)), ("b1", (h,)), ("W2", (e, h)), ("b2", (e,)),
                  ("W3", (h, e)), ("b3", (h,)), ("W4", (o, h)), ("b4", (o,))]
        views = {}
        pos = 0
        for name, shape in shapes:
            size = int(np.prod(shape))
            views[name] = self.parameters[pos:pos + size].reshape(shape)
            pos += size
        assert pos == self.parameters.size
        return views

    def standardize(self, values: np.ndarray, missing: np.ndarray) -> np.ndarray:
        """Standardize raw values; missing cells become 0 (the training mean)."""
        z = (values - self.feature_means) / self.feature_stds
        return np.where(missing, 0.0, z)

    def unstandardize(self, z: np.ndarray) -> np.ndarray:
        return z * self.feature_stds + self.feature_means


def parameter_count(config: EmbedderConfig, n_features: int) -> int:
    d = 2 * config.window_steps * n_features
    o = config.window_steps * n_features
    h, e = config.hidden_dim, config.embed_dim
    return (h * d + h) + (e * h + e) + (h * e + h) + (o * h + o)


def initialize_model(config: EmbedderConfig, n_features: int,
                     means: np.ndarray | None = None,
                     stds: np.ndarray | None = None,
                     rng: np.random.Generator | None = None) -> EmbedderModel:
    """Seeded Gaussian init scaled by 1/sqrt(fan_in); biases start at zero."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    d = 2 * config.window_steps * n_features
    o = config.window_steps * n_features
    h, e = config.hidden_dim, config.embed_dim
    parts = []
    for rows, cols in [(h, d), (e, h), (h, e), (o, h)]:
        parts.append(rng.normal(0.0, 1.0 / np.sqrt(cols), size=rows * cols))
        parts.append(np.zeros(rows))
    order = [0, 1, 2, 3, 4, 5, 6, 7]  # W1 b1 W2 b2 W3 b3 W4 b4
    flat = np.concatenate([parts[i] for i in order])
    return EmbedderModel(
        config=config,
        n_features=n_features,
        feature_means=means if means is not None else np.zeros(n_features),
        feature_stds=stds if stds is not None else np.ones(n_features),
        parameters=flat,
    )


# ---------------------------------------------------------------------------
# Windows

def extract_window(trajectory: PatientTrajectory, step: int, window_steps: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Raw (values, missing) window ending at `step`, left-padded with the
    earliest observation when the stay is shorter than the window."""
    if not 0 <= step < len(trajectory.steps):
        raise ValueError(f"step {step} out of range for trajectory "
                         f"{trajectory.patient_id} with {len(trajectory.steps)} steps")
    rows = []
    for k in range(step - window_steps + 1, step + 1):
        rows.append(trajectory.steps[max(k, 0)])
    values = np.stack([r.values for r in rows])
    missing = np.stack([r.missing for r in rows])
    return values, missing


def training_windows(cohort: Cohort, config: EmbedderConfig
                     ) -> tuple[np.ndarray, np.ndarray]:
    """All (patient, step) windows as raw arrays of shape (N, W, F)."""
    values, missing = [], []
    for p in cohort.patients:
        for step in range(len(p.steps)):
            v, m = extract_window(p, step, config.window_steps)
            values.append(v)
            missing.append(m)
    if not values:
        raise ValueError("cohort has no windows")
    return np.stack(values), np.stack(missing)


def standardization_stats(cohort: Cohort) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature (mean, std) over non-missing cells of the whole cohort."""
    all_values = np.concatenate([p.values_matrix() for p in cohort.patients])
    all_missing = np.concatenate([p.missing_matrix() for p in cohort.patients])
    n_feat = all_values.shape[1]
    means = np.zeros(n_feat)
    stds = np.ones(n_feat)
    for j in range(n_feat):
        col = all_values[~all_missing[:, j], j]
        if col.size:
            means[j] = col.mean()
            sd = col.std()
            stds[j] = sd if sd > 0.0 else 1.0
    return means, stds


# ---------------------------------------------------------------------------
# Corruption, forward/backward, training

def corrupt(window: np.ndarray, rate: float, rng: np.random.Generator
            ) -> tuple[np.ndarray, np.ndarray]:
    """Mask cells to the standardized mean (0) independently with prob `rate`."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    mask = rng.random(window.shape) < rate
    return np.where(mask, 0.0, window), mask


def _forward(views: dict, x: np.ndarray):
    h1 = np.tanh(x @ views["W1"].T + views["b1"])
    z = h1 @ views["W2"].T + views["b2"]
    h2 = np.tanh(z @ views["W3"].T + views["b3"])
    y = h2 @ views["W4"].T + views["b4"]
    return h1, z, h2, y


def _batch_input(corrupted: np.ndarray, missing: np.ndarray) -> np.ndarray:
    b = corrupted.shape[0]
    return np.concatenate(
        [corrupted.reshape(b, -1), missing.reshape(b, -1).astype(float)], axis=1
    )


def batch_loss_and_grad(model: EmbedderModel, values_std: np.ndarray,
                        missing: np.ndarray, corrupted: np.ndarray,
                        want_grad: bool = True) -> tuple[float, np.ndarray | None]:
    """Masked reconstruction MSE and its gradient for one corrupted batch.

    The target is the uncorrupted standardized window; missing cells are
    excluded so the model is never trained to reconstruct imputed values.
    """
    views = model._views()
    b = values_std.shape[0]
    x = _batch_input(corrupted, missing)
    target = values_std.reshape(b, -1)
    include = (~missing.reshape(b, -1)).astype(float)
    denom = include.sum()
    h1, z, h2, y = _forward(views, x)
    resid = (y - target) * include
    if denom == 0.0:
        return 0.0, (np.zeros_like(model.parameters) if want_grad else None)
    loss = float((resid ** 2).sum() / denom)
    if not want_grad:
        return loss, None

    dy = 2.0 * resid / denom
    g = {}
    g["W4"] = dy.T @ h2
    g["b4"] = dy.sum(axis=0)
    dh2 = dy @ views["W4"]
    da2 = dh2 * (1.0 - h2 ** 2)
    g["W3"] = da2.T @ z
    g["b3"] = da2.sum(axis=0)
    dz = da2 @ views["W3"]
    g["W2"] = dz.T @ h1
    g["b2"] = dz.sum(axis=0)
    dh1 = dz @ views["W2"]
    da1 = dh1 * (1.0 - h1 ** 2)
    g["W1"] = da1.T @ x
    g["b1"] = da1.sum(axis=0)
    flat = np.concatenate([g[k].ravel() for k in ("W1", "b1", "W2", "b2",
                                                  "W3", "b3", "W4", "b4")])
    return loss, flat


def train(train_cohort: Cohort, config: EmbedderConfig) -> EmbedderModel:
    """Train the denoising autoencoder; bitwise deterministic given the seed."""
    means, stds = standardization_stats(train_cohort)
    raw_values, missing = training_windows(train_cohort, config)
    n = raw_values.shape[0]
    if n < config.batch_size:
        raise ValueError(f"need at least batch_size={config.batch_size} windows, got {n}")
    rng = np.random.default_rng(config.seed)
    model = initialize_model(config, raw_values.shape[2], means, stds, rng=rng)
    values_std = model.standardize(raw_values, missing)

    velocity = np.zeros_like(model.parameters)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch_values = values_std[idx]
            batch_missing = missing[idx]
            corrupted, _ = corrupt(batch_values, config.corruption_rate, rng)
            loss, grad = batch_loss_and_grad(model, batch_values, batch_missing, corrupted)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            velocity = MOMENTUM * velocity - config.learning_rate * grad
            model.parameters += velocity
            epoch_losses.append(loss)
        epoch_mean = float(np.mean(epoch_losses))
        if not np.isfinite(epoch_mean):
            raise DivergenceError(epoch)
        model.loss_history.append(epoch_mean)
    return model


def embed(model: EmbedderModel, trajectory: PatientTrajectory, step: int) -> StateEmbedding:
    """Unit-norm embedding of the window ending at `step`."""
    values, missing = extract_window(trajectory, step, model.config.window_steps)
    values_std = model.standardize(values, missing)
    x = _batch_input(values_std[None, :, :], missing[None, :, :])
    views = model._views()
    h1 = np.tanh(x @ views["W1"].T + views["b1"])
    z = (h1 @ views["W2"].T + views["b2"])[0]
    norm = float(np.linalg.norm(z))
    if norm < 1e-12:
        z = np.zeros(model.config.embed_dim)
        z[0] = 1.0
    else:
        z = z / norm
    return StateEmbedding(patient_id=trajectory.patient_id, step_index=step, vector=z)


def gradient_check(model: EmbedderModel, batch: tuple[np.ndarray, np.ndarray],
                   epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `batch` is a (values_std, missing) pair of shape (B, W, F). Corruption is
    drawn once from the model seed so both gradient routes see the same input.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    values_std, missing = batch
    if values_std.size == 0:
        raise ValueError("batch must be non-empty")
    rng = np.random.default_rng(model.config.seed)
    corrupted, _ = corrupt(values_std, model.config.corruption_rate, rng)
    _, analytic = batch_loss_and_grad(model, values_std, missing, corrupted)

    params = model.parameters
    worst = 0.0
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + epsilon
        up, _ = batch_loss_and_grad(model, values_std, missing, corrupted, want_grad=False)
        params[i] = orig - epsilon
        down, _ = batch_loss_and_grad(model, values_std, missing, corrupted, want_grad=False)
        params[i] = orig
        numeric = (up - down) / (2.0 * epsilon)
        scale = max(abs(analytic[i]) + abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[i] - numeric) / scale)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints

def save_model(model: EmbedderModel) -> bytes:
    header = json.dumps(
        {"config": model.config.to_dict(), "n_features": model.n_features,
         "loss_history": model.loss_history},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", CHECKPOINT_VERSION)
    blob += struct.pack("<I", len(header))
    blob += header
    for arr in (model.feature_means, model.feature_stds, model.parameters):
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        blob += struct.pack("<Q", len(data))
        blob += data
    return bytes(blob)


def load_model(blob: bytes) -> EmbedderModel:
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic bytes: not an embedder checkpoint")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<I", blob, 8)
    pos = 12
    header = json.loads(blob[pos:pos + header_len].decode("utf-8"))
    pos += header_len
    arrays = []
    for _ in range(3):
        (size,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        arrays.append(np.frombuffer(blob[pos:pos + size], dtype="<f8").copy())
        pos += size
    config = EmbedderConfig(**header["config"])
    model = EmbedderModel(
        config=config,
        n_features=header["n_features"],
        feature_means=arrays[0],
        feature_stds=arrays[1],
        parameters=arrays[2],
        loss_history=list(header["loss_history"]),
    )
    if model.parameters.size != parameter_count(config, model.n_features):
        raise CheckpointError("parameter vector does not match config")
    return model


def model_fingerprint(model: EmbedderModel) -> str:
    return hashlib.sha256(save_model(model)).hexdigest()
