"""Deterministic (attack x defense x seed) experiment grid with a bounded
worker pool; identical config and seeds give byte-identical outputs at any
parallelism level."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackConfig, AttackOutcome, compute_metrics, run_attack
from .classifier import Dataset, Model, accuracy, gen_blobs, init_model, predict_batch, train
from .core import DomainError, RngStream, derive_stream
from .oracle import DefendedModel, NoiseSpec


@dataclass(frozen=True)
class ModelSpec:
    """Either a path to a saved model JSON or generation/training parameters."""

    path: str | None = None
    kind: str = "mlp"
    dim: int = 32
    n_classes: int = 10
    hidden: int = 64
    n_per_class: int = 40
    spread: float = 0.15
    train_lr: float = 0.5
    train_epochs: int = 300

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "kind": self.kind,
            "dim": self.dim,
            "n_classes": self.n_classes,
            "hidden": self.hidden,
            "n_per_class": self.n_per_class,
            "spread": self.spread,
            "train_lr": self.train_lr,
            "train_epochs": self.train_epochs,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        return cls(**doc)


@dataclass
class ExperimentConfig:
    model: ModelSpec
    attacks: list[tuple[str, AttackConfig]]
    noises: list[tuple[str, NoiseSpec]]
    seeds: list[int]
    parallelism: int = 1

    def __post_init__(self):
        if not self.attacks or not self.noises or not self.seeds:
            raise DomainError("attacks, noises, and seeds must all be non-empty")


def make_data(spec: ModelSpec, master: RngStream) -> tuple[Dataset, Dataset]:
    """One blob draw split per class into train and holdout halves, so both
    halves share the same cluster centers."""
    full = gen_blobs(
        spec.dim, spec.n_classes, 2 * spec.n_per_class, spec.spread, derive_stream(master, "data")
    )
    train_idx, hold_idx = [], []
    for c in range(spec.n_classes):
        block = np.flatnonzero(full.labels == c)
        train_idx.extend(block[: spec.n_per_class])
        hold_idx.extend(block[spec.n_per_class :])
    train_set = Dataset(full.inputs[train_idx], full.labels[train_idx], spec.n_classes)
    hold_set = Dataset(full.inputs[hold_idx], full.labels[hold_idx], spec.n_classes)
    return train_set, hold_set


def build_model(spec: ModelSpec, master: RngStream) -> tuple[Model, Dataset]:
    """Generate data and train (or load) the grid's model, deterministically
    from the master stream."""
    data, _hold = make_data(spec, master)
    if spec.path:
        return Model.load_json(spec.path), data
    model = init_model(spec.kind, spec.dim, spec.n_classes, derive_stream(master, "init"), spec.hidden)
    model = train(model, data, spec.train_lr, spec.train_epochs)
    return model, data


def select_instance(
    model: Model, data: Dataset, seed: int, master: RngStream, targeted: bool
) -> tuple[np.ndarray, int, int | None]:
    """Pick a correctly classified input and, for targeted attacks, a target
    class, deterministically per seed."""
    rng = derive_stream(master, f"instance-{seed}")
    preds = predict_batch(model, data.inputs).argmax(axis=1)
    good = np.flatnonzero(preds == data.labels)
    if len(good) == 0:
        raise DomainError("model classifies no dataset point correctly")
    idx = int(good[int(rng.integers(0, len(good)))])
    clean_class = int(data.labels[idx])
    target = None
    if targeted:
        others = [c for c in range(data.n_classes) if c != clean_class]
        target = others[int(rng.integers(0, len(others)))]
    return data.inputs[idx], clean_class, target


def _run_cell(args) -> dict:
    model_doc, attack_doc, noise_doc, attack_name, noise_name, seed, master_seed = args
    try:
        return _run_cell_inner(model_doc, attack_doc, noise_doc, attack_name, noise_name, seed, master_seed)
    except Exception as exc:  # failed cells are recorded, not silently dropped
        return {
            "attack": attack_name,
            "noise": noise_name,
            "seed": seed,
            "error": f"{type(exc).__name__}: {exc}",
        }


def _run_cell_inner(model_doc, attack_doc, noise_doc, attack_name, noise_name, seed, master_seed) -> dict:
    model = Model.from_document(model_doc)
    cfg = AttackConfig.from_dict(attack_doc)
    spec = NoiseSpec.from_dict(noise_doc)
    master = RngStream(master_seed)
    data = gen_blobs_from_master(model_doc, master)
    x0, clean_class, target = select_instance(model, data, seed, master, cfg.targeted)
    if cfg.targeted:
        cfg = AttackConfig.from_dict({**cfg.to_dict(), "target_class": target})
    label = f"{attack_name}-{noise_name}-{seed}"
    dm = DefendedModel(model=model, spec=spec, rng=derive_stream(master, f"oracle-{label}"))
    outcome = run_attack(dm, x0, clean_class, cfg, derive_stream(master, f"attack-{label}"))
    return outcome_record(attack_name, cfg, noise_name, spec, seed, outcome)


def gen_blobs_from_master(model_doc: dict, master: RngStream) -> Dataset:
    gen = model_doc["_gen"]
    spec = ModelSpec(
        dim=gen["dim"],
        n_classes=gen["n_classes"],
        n_per_class=gen["n_per_class"],
        spread=gen["spread"],
    )
    data, _hold = make_data(spec, master)
    return data


def outcome_record(
    attack_name: str,
    cfg: AttackConfig,
    noise_name: str,
    spec: NoiseSpec,
    seed: int,
    outcome: AttackOutcome,
) -> dict:
    return {
        "attack": attack_name,
        "targeted": cfg.targeted,
        "noise": noise_name,
        "noise_kind": spec.kind,
        "sigma": spec.sigma,
        "q_bits": spec.q_bits,
        "alpha": spec.alpha,
        "repeat_N": cfg.repeat_n,
        "seed": seed,
        "success": outcome.success,
        "queries": outcome.queries,
        "iterations": outcome.iterations,
        "l2_per_pixel": outcome.l2_per_pixel,
        "final_label": outcome.final_label,
    }


def run_grid(config: ExperimentConfig, master_seed: int) -> dict:
    """Run every (attack x noise x seed) cell and aggregate per cell group.

    Returns {"records": [...], "rows": [...]} in deterministic order.
    """
    master = RngStream(master_seed)
    model, _data = build_model(config.model, master)
    model_doc = model.to_document()
    model_doc["_gen"] = {
        "dim": config.model.dim,
        "n_classes": config.model.n_classes,
        "n_per_class": config.model.n_per_class,
        "spread": config.model.spread,
    }

    cells = [
        (model_doc, cfg.to_dict(), spec.to_dict(), a_name, n_name, seed, master_seed)
        for a_name, cfg in config.attacks
        for n_name, spec in config.noises
        for seed in config.seeds
    ]
    workers = int(os.environ.get("NOISEFENCE_THREADS", config.parallelism))
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        records = [_run_cell(c) for c in cells]

    errors = [r for r in records if "error" in r]
    rows = []
    i = 0
    for a_name, _cfg in config.attacks:
        for n_name, _spec in config.noises:
            group = [r for r in records[i : i + len(config.seeds)] if "error" not in r]
            i += len(config.seeds)
            if not group:
                rows.append(
                    {
                        "attack": a_name,
                        "noise": n_name,
                        "asr": 0.0,
                        "mean_qc_success": 0.0,
                        "mean_l2_success": 0.0,
                        "n_seeds": 0,
                    }
                )
                continue
            outcomes = [
                AttackOutcome(
                    success=r["success"],
                    queries=r["queries"],
                    iterations=r["iterations"],
                    l2_per_pixel=r["l2_per_pixel"],
                    final_label=r["final_label"],
                )
                for r in group
            ]
            metrics = compute_metrics(outcomes)
            rows.append(
                {
                    "attack": a_name,
                    "noise": n_name,
                    "asr": metrics["asr"],
                    "mean_qc_success": metrics["mean_qc_success"],
                    "mean_l2_success": metrics["mean_l2_success"],
                    "n_seeds": len(group),
                }
            )
    return {"records": records, "rows": rows, "errors": errors}


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def write_csv(rows: list[dict], path) -> None:
    import csv

    if not rows:
        raise DomainError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
