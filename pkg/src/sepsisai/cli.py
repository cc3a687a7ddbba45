"""Command-line entry points; thin wrappers over the core package.

Every command accepts `--seed` and `--config FILE` (plain-text key=value).
Explicit flags win over config entries, which win over defaults. Exit code
is 0 on success and 2 on any validation or domain error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .bundle import (
    CASES_FILE,
    COHORT_FILE,
    EVAL_FILE,
    INDEX_FILE,
    MODEL_FILE,
    TRAIN_FILE,
    StudyBundle,
    StudyCase,
    save_cases_artifact,
)
from .cohort import (
    drop_post_cmo,
    filter_sepsis_cohort,
    parse_cohort,
    split_train_eval,
    truncate_long_stays,
    write_cohort,
)
from .config import read_kv_config
from .cues import CueConfig
from .embedder import EmbedderConfig, load_model, save_model, train
from .errors import SepsisAIError
from .interfaces import INTERACTIVE_KINDS, InterfaceKind
from .neighbors import build_index, load_index, save_index
from .plans import PressorAction, TreatmentPlan, VolumeAction
from .schema import DEFAULT_SCHEMA
from .study import build_eligibility, select_complex_cases
from .synth import GeneratorConfig, generate_cohort, generate_vignette

VALIDATION_EXIT = 2


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(VALIDATION_EXIT)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SepsisAIError, ValueError, KeyError, FileNotFoundError) as exc:
            _fail(str(exc))
    return wrapper


def common_options(fn):
    fn = click.option("--data-dir", type=click.Path(path_type=Path), default=Path("data"),
                      show_default=True, help="Directory holding pipeline artifacts.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Deterministic seed.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(path_type=Path),
                      default=None, help="Plain-text key=value config file.")(fn)
    return fn


def _pick(cli_value, cfg: dict, key: str, default, convert=str):
    if cli_value is not None:
        return cli_value
    if key in cfg:
        return convert(cfg[key])
    return default


@click.group()
def main():
    """Neighbor-based sepsis decision support pipeline and study service."""


# ---------------------------------------------------------------------------
# synth generate

@main.group()
def synth():
    """Synthetic cohort generation."""


@synth.command("generate")
@common_options
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--n-patients", type=int, default=None)
@click.option("--mean-stay-steps", type=int, default=None)
@click.option("--mortality-rate", type=float, default=None)
@click.option("--pressor-rate", type=float, default=None)
@handle_errors
def synth_generate(data_dir, seed, config_path, out, n_patients, mean_stay_steps,
                   mortality_rate, pressor_rate):
    """Write a seeded synthetic cohort in the cohort file format."""
    cfg = read_kv_config(config_path)
    gen = GeneratorConfig(
        n_patients=_pick(n_patients, cfg, "n_patients", 100, int),
        mean_stay_steps=_pick(mean_stay_steps, cfg, "mean_stay_steps", 12, int),
        mortality_rate=_pick(mortality_rate, cfg, "mortality_rate", 0.2, float),
        pressor_after_12h_rate=_pick(pressor_rate, cfg, "pressor_after_12h_rate", 0.3, float),
        seed=_pick(seed, cfg, "seed", 0, int),
    )
    cohort = generate_cohort(gen)
    out = out or data_dir / COHORT_FILE
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_cohort(cohort, fh)
    click.echo(f"wrote {len(cohort)} patients to {out}")


# ---------------------------------------------------------------------------
# cohort build

@main.group()
def cohort():
    """Cohort pipeline."""


@cohort.command("build")
@common_options
@click.option("--in", "in_path", type=click.Path(path_type=Path), default=None)
@click.option("--out-train", type=click.Path(path_type=Path), default=None)
@click.option("--out-eval", type=click.Path(path_type=Path), default=None)
@click.option("--truncate-percentile", type=float, default=None)
@handle_errors
def cohort_build(data_dir, seed, config_path, in_path, out_train, out_eval,
                 truncate_percentile):
    """Filter, truncate, and split a raw cohort into train/eval halves."""
    cfg = read_kv_config(config_path)
    in_path = in_path or data_dir / COHORT_FILE
    out_train = out_train or data_dir / TRAIN_FILE
    out_eval = out_eval or data_dir / EVAL_FILE
    percentile = _pick(truncate_percentile, cfg, "truncate_percentile", 0.95, float)
    split_seed = _pick(seed, cfg, "seed", 0, int)

    with open(in_path, encoding="utf-8") as fh:
        raw = parse_cohort(fh, DEFAULT_SCHEMA, provenance="synthetic")
    from dataclasses import replace
    censored = replace(raw, patients=tuple(drop_post_cmo(p) for p in raw.patients))
    filtered = filter_sepsis_cohort(censored)
    if not filtered.patients:
        _fail("no patients remain after sepsis-cohort filtering")
    truncated = truncate_long_stays(filtered, percentile)
    train_cohort, eval_cohort = split_train_eval(truncated, split_seed)
    for path, half in ((out_train, train_cohort), (out_eval, eval_cohort)):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            write_cohort(half, fh)
    click.echo(
        f"parsed {len(raw)} patients; retained {len(filtered)} after filtering; "
        f"split into {len(train_cohort)} train / {len(eval_cohort)} eval"
    )


# ---------------------------------------------------------------------------
# embed train

@main.group()
def embed():
    """State embedder."""


@embed.command("train")
@common_options
@click.option("--data", "data_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--window-steps", type=int, default=None)
@click.option("--embed-dim", type=int, default=None)
@click.option("--hidden-dim", type=int, default=None)
@click.option("--corruption-rate", type=float, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@handle_errors
def embed_train(data_dir, seed, config_path, data_path, out, window_steps,
                embed_dim, hidden_dim, corruption_rate, learning_rate, epochs,
                batch_size):
    """Train the denoising autoencoder on the training half."""
    cfg = read_kv_config(config_path)
    data_path = data_path or data_dir / TRAIN_FILE
    out = out or data_dir / MODEL_FILE
    econfig = EmbedderConfig(
        window_steps=_pick(window_steps, cfg, "window_steps", 6, int),
        embed_dim=_pick(embed_dim, cfg, "embed_dim", 32, int),
        hidden_dim=_pick(hidden_dim, cfg, "hidden_dim", 64, int),
        corruption_rate=_pick(corruption_rate, cfg, "corruption_rate", 0.15, float),
        learning_rate=_pick(learning_rate, cfg, "learning_rate", 1e-3, float),
        epochs=_pick(epochs, cfg, "epochs", 30, int),
        batch_size=_pick(batch_size, cfg, "batch_size", 64, int),
        seed=_pick(seed, cfg, "seed", 0, int),
    )
    with open(data_path, encoding="utf-8") as fh:
        train_cohort = parse_cohort(fh, DEFAULT_SCHEMA, provenance="synthetic")
    model = train(train_cohort, econfig)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_model(model))
    first = model.loss_history[0] if model.loss_history else float("nan")
    last = model.loss_history[-1] if model.loss_history else float("nan")
    click.echo(f"trained {econfig.epochs} epochs; loss {first:.4f} -> {last:.4f}; "
               f"checkpoint at {out}")


# ---------------------------------------------------------------------------
# index build

@main.group()
def index():
    """Nearest-neighbor index."""


@index.command("build")
@common_options
@click.option("--data", "data_path", type=click.Path(path_type=Path), default=None)
@click.option("--model", "model_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@handle_errors
def index_build(data_dir, seed, config_path, data_path, model_path, out):
    """Embed and label every evaluation state."""
    data_path = data_path or data_dir / EVAL_FILE
    model_path = model_path or data_dir / MODEL_FILE
    out = out or data_dir / INDEX_FILE
    model = load_model(model_path.read_bytes())
    with open(data_path, encoding="utf-8") as fh:
        eval_cohort = parse_cohort(fh, DEFAULT_SCHEMA, provenance="synthetic")
    idx = build_index(eval_cohort, model)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_index(idx))
    click.echo(f"indexed {len(idx)} states from {len(eval_cohort)} patients; "
               f"fingerprint {idx.build_fingerprint[:12]}")


# ---------------------------------------------------------------------------
# cases select

@main.group()
def cases():
    """Study case selection."""


@cases.command("select")
@common_options
@click.option("--n", type=int, default=None)
@click.option("--k", type=int, default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@handle_errors
def cases_select(data_dir, seed, config_path, n, k, out):
    """Select complex cases, write vignettes, and compute eligibility."""
    cfg = read_kv_config(config_path)
    n = _pick(n, cfg, "n_cases", 4, int)
    vignette_seed = _pick(seed, cfg, "seed", 0, int)
    cue_cfg = CueConfig(k=_pick(k, cfg, "k", 100, int))
    out = out or data_dir / CASES_FILE

    model = load_model((data_dir / MODEL_FILE).read_bytes())
    with open(data_dir / EVAL_FILE, encoding="utf-8") as fh:
        eval_cohort = parse_cohort(fh, DEFAULT_SCHEMA, provenance="synthetic")
    idx = load_index((data_dir / INDEX_FILE).read_bytes(), model)

    selection = select_complex_cases(eval_cohort, idx, model, n, cue_cfg)
    if not selection.refs:
        _fail("no complex cases found")
    study_cases = []
    for ref in selection.refs:
        trajectory = eval_cohort.patient(ref.patient_id)
        vignette = generate_vignette(trajectory, vignette_seed, step=ref.step)
        study_cases.append(StudyCase(
            ref=ref, pseudonym=vignette.pseudonym, profile=vignette.profile,
            complicating_factors=vignette.complicating_factors, text=vignette.text,
        ))
    eligibility = build_eligibility(selection.refs, eval_cohort, idx, model, cue_cfg)
    save_cases_artifact(out, study_cases, eligibility, selection.shortfall)
    for case in study_cases:
        click.echo(f"case {case.ref.patient_id} step {case.ref.step}: {case.pseudonym}")
    if selection.shortfall:
        click.echo(f"warning: only {len(selection.refs)} of {n} requested cases "
                   "met the complexity gates", err=True)
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# cues show

@main.group()
def cues():
    """Reasoning-cue inspection."""


@cues.command("show")
@common_options
@click.option("--patient", type=int, required=True)
@click.option("--step", type=int, default=None,
              help="Defaults to the selected case's decision step.")
@click.option("--interface", "interface_name", type=str, required=True)
@click.option("--volume", type=str, default=None)
@click.option("--vasopressor", type=str, default=None)
@click.option("--k", type=int, default=None)
@handle_errors
def cues_show(data_dir, seed, config_path, patient, step, interface_name,
              volume, vasopressor, k):
    """Print the InterfaceView JSON for one case and interface kind."""
    cfg = read_kv_config(config_path)
    cue_cfg = CueConfig(k=_pick(k, cfg, "k", 100, int))
    kind = InterfaceKind(interface_name)
    bundle = StudyBundle.load(data_dir, cue_cfg)

    selected_plan = None
    if kind in INTERACTIVE_KINDS:
        if volume is None or vasopressor is None:
            _fail(f"{kind.value} requires --volume and --vasopressor")
        selected_plan = TreatmentPlan(VolumeAction(volume), PressorAction(vasopressor))

    if step is None:
        case = bundle.case(patient)
        step = case.ref.step
        view = bundle.compose(patient, kind, selected_plan)
    else:
        from .interfaces import case_state, compose_interface
        from .neighbors import query as nn_query
        from .embedder import embed as embed_state
        trajectory = bundle.trajectory(patient)
        state = case_state(bundle.model, trajectory, step)
        neighbors = nn_query(bundle.index, embed_state(bundle.model, trajectory, step),
                             cue_cfg.k)
        view = compose_interface(kind, state, neighbors, selected_plan, cue_cfg)
    click.echo(json.dumps(view.to_dict(), indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# serve

@main.command("serve")
@common_options
@click.option("--port", type=int, default=None)
@click.option("--host", type=str, default=None)
@click.option("--token", type=str, default=None,
              help="Bearer token required on every API request.")
@click.option("--static-dir", type=click.Path(path_type=Path), default=None,
              help="Directory of built dashboard assets to serve at /.")
@handle_errors
def serve(data_dir, seed, config_path, port, host, token, static_dir):
    """Run the study service over the artifacts in --data-dir."""
    import uvicorn

    from .service import create_app

    cfg = read_kv_config(config_path)
    port = _pick(port, cfg, "port", 8000, int)
    host = _pick(host, cfg, "host", "127.0.0.1", str)
    token = _pick(token, cfg, "api_token", None, str)
    static = _pick(static_dir, cfg, "static_dir", None, Path)
    k = int(cfg.get("k", 100))
    app = create_app(data_dir, api_token=token, cue_config=CueConfig(k=k),
                     static_dir=static)
    click.echo(f"serving study data from {data_dir} on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
