"""Flat key=value experiment config files with section headers (INI style).

Sections:
  [model]            model generation/training parameters, or path=...
  [grid]             seeds, qc_limit, parallelism
  [attack <name>]    one attack per section; keys mirror AttackConfig
  [noise <name>]     one defense per section; keys mirror NoiseSpec
  [analyze]          sigma grid, Table-style output statistics, constants
"""

from __future__ import annotations

import configparser

from .attack import AttackConfig
from .estimator import EstimatorConfig
from .grid import ExperimentConfig, ModelSpec
from .oracle import NoiseSpec


class ConfigError(ValueError):
    pass


def parse_seeds(text: str) -> list[int]:
    """Either a comma list "0,1,2" or a half-open range "0:50"."""
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1", "on"):
        return True
    if text.lower() in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def load_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parser


def model_spec_from(section) -> ModelSpec:
    return ModelSpec(
        path=section.get("path") or None,
        kind=section.get("kind", "mlp"),
        dim=section.getint("d", 32),
        n_classes=section.getint("classes", 10),
        hidden=section.getint("hidden", 64),
        n_per_class=section.getint("n_per_class", 40),
        spread=section.getfloat("spread", 0.15),
        train_lr=section.getfloat("train_lr", 0.5),
        train_epochs=section.getint("train_epochs", 300),
    )


def attack_config_from(section, qc_limit: int) -> AttackConfig:
    try:
        estimator = EstimatorConfig(
            beta=section.getfloat("beta", 1e-3),
            queries_per_iter=section.getint("queries_per_iter", 50),
        )
        max_dist = section.get("max_distortion")
        return AttackConfig(
            kind=section.get("kind", "nes"),
            targeted=_bool(section.get("targeted", "true")),
            learning_rate=section.getfloat("learning_rate", 0.01),
            qc_limit=section.getint("qc_limit", qc_limit),
            max_distortion=float(max_dist) if max_dist else None,
            estimator=estimator,
            hard_proxy_r=section.getint("hard_proxy_r", 20),
            hard_proxy_spread=section.getfloat("hard_proxy_spread", 0.05),
            repeat_n=section.getint("repeat_n", 1),
        )
    except ValueError as exc:
        raise ConfigError(f"bad attack section [{section.name}]: {exc}") from exc


def noise_spec_from(section) -> NoiseSpec:
    try:
        return NoiseSpec(
            kind=section.get("kind", "none"),
            sigma=section.getfloat("sigma", 0.0),
            q_bits=section.getint("q_bits", 8),
            alpha=section.getfloat("alpha", 0.0),
            eps_sigma=section.getfloat("eps_sigma", 1e-8),
            preserve_top1=_bool(section.get("preserve_top1", "false")),
            label_mode=section.get("label_mode", "soft"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad noise section [{section.name}]: {exc}") from exc


def experiment_config(path) -> ExperimentConfig:
    parser = load_ini(path)
    if "model" not in parser:
        raise ConfigError("missing [model] section")
    if "grid" not in parser:
        raise ConfigError("missing [grid] section")
    grid = parser["grid"]
    qc_limit = grid.getint("qc_limit", 20_000)
    attacks = []
    noises = []
    for name in parser.sections():
        if name.startswith("attack "):
            attacks.append((name.split(" ", 1)[1], attack_config_from(parser[name], qc_limit)))
        elif name.startswith("noise "):
            noises.append((name.split(" ", 1)[1], noise_spec_from(parser[name])))
    seeds = parse_seeds(grid.get("seeds", "0:10"))
    if not attacks or not noises or not seeds:
        raise ConfigError("config needs at least one attack, one noise, and one seed")
    return ExperimentConfig(
        model=model_spec_from(parser["model"]),
        attacks=attacks,
        noises=noises,
        seeds=seeds,
        parallelism=grid.getint("parallelism", 1),
    )
