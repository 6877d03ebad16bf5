"""Run configuration: flat key=value files with dotted section keys.

A config is a dictionary from dotted keys (``train.epochs``) to typed
values. Values come from three layers, later winning: built-in defaults, a
config file, command-line overrides (``--train.epochs=5``). Validation
collects every problem before raising, and ``format_config`` renders the
fully resolved state in a form ``parse_config_text`` reads back verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import SyntheticSpec
from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig

_FAMILIES = ("lora", "blob", "clora", "coco", "fusion")


def _parse_int(raw: str) -> int:
    return int(raw, 10)


def _parse_float(raw: str) -> float:
    value = float(raw)
    if value != value:
        raise ValueError("nan is not a valid config value")
    return value


def _parse_str(raw: str) -> str:
    return raw


def _parse_optional_str(raw: str):
    return raw or None


def _parse_floats(raw: str) -> tuple:
    if not raw.strip():
        return ()
    return tuple(_parse_float(part) for part in raw.split(","))


def _parse_optional_floats(raw: str):
    return _parse_floats(raw) or None


def _parse_ints(raw: str) -> tuple:
    if not raw.strip():
        return ()
    return tuple(_parse_int(part) for part in raw.split(","))


def _parse_strs(raw: str) -> tuple:
    if not raw.strip():
        return ()
    return tuple(part.strip() for part in raw.split(","))


@dataclass(frozen=True)
class _Field:
    default: object
    parse: object
    help: str


SCHEMA = {
    "seed": _Field(0, _parse_int, "master seed for init, training, and eval streams"),
    "data.path": _Field(None, _parse_optional_str, "JSONL dataset to load instead of generating"),
    "data.meta_path": _Field(None, _parse_optional_str, "JSON sidecar with per-sample noise levels"),
    "data.n_samples": _Field(2000, _parse_int, "synthetic sample count"),
    "data.text_dim": _Field(16, _parse_int, "synthetic text feature width"),
    "data.audio_dim": _Field(16, _parse_int, "synthetic audio feature width"),
    "data.n_classes": _Field(2, _parse_int, "synthetic class count"),
    "data.noise_levels": _Field((0.0, 0.1, 0.2, 0.3, 0.4), _parse_floats, "label-flip probabilities"),
    "data.class_prior": _Field(None, _parse_optional_floats, "class prior (uniform when empty)"),
    "model.family": _Field("coco", _parse_str, "one of lora, blob, clora, coco, fusion"),
    "model.n_layers": _Field(2, _parse_int, "backbone depth"),
    "model.rank": _Field(8, _parse_int, "adapter rank"),
    "model.alpha": _Field(32.0, _parse_float, "adapter scale numerator (scale = alpha / rank)"),
    "model.context_dim": _Field(16, _parse_int, "shared audio embedding width"),
    "model.epsilon": _Field(0.05, _parse_float, "posterior std softplus scale"),
    "model.delta": _Field(1e-6, _parse_float, "posterior std floor"),
    "train.epochs": _Field(2, _parse_int, "training epochs"),
    "train.batch_size": _Field(32, _parse_int, "minibatch size"),
    "train.learning_rate": _Field(1e-3, _parse_float, "AdamW learning rate"),
    "train.weight_decay": _Field(1e-3, _parse_float, "AdamW decoupled weight decay"),
    "train.prior_std": _Field(0.2, _parse_float, "prior scale beta"),
    "train.kl_weight": _Field(0.008, _parse_float, "KL reweighting coefficient gamma"),
    "eval.n_draws": _Field(10, _parse_int, "Monte Carlo draws for the posterior predictive"),
    "eval.folds": _Field(5, _parse_int, "cross-validation folds for compare"),
    "eval.bins": _Field(10, _parse_int, "calibration bins"),
    "compare.families": _Field(_FAMILIES, _parse_strs, "families the compare harness runs"),
    "compare.seeds": _Field((0, 1, 2), _parse_ints, "seeds the compare harness runs"),
}


def default_config() -> dict:
    return {key: field.default for key, field in SCHEMA.items()}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; blanks ignored."""
    values = {}
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(f"{source}:{lineno}: expected 'key = value', got '{stripped}'")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in values:
            errors.append(f"{source}:{lineno}: duplicate key '{key}'")
            continue
        values[key] = (lineno, raw)
    parsed = {}
    for key, (lineno, raw) in values.items():
        if key not in SCHEMA:
            errors.append(f"{source}:{lineno}: unknown key '{key}'")
            continue
        try:
            parsed[key] = SCHEMA[key].parse(raw)
        except ValueError as exc:
            errors.append(f"{source}:{lineno}: bad value for '{key}': {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    return parsed


def load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``key=value`` strings (from --key=value flags) onto a config."""
    errors = []
    merged = dict(config)
    for item in overrides:
        if "=" not in item:
            errors.append(f"override '{item}' must look like key=value")
            continue
        key, _, raw = item.partition("=")
        key = key.strip().lstrip("-")
        if key not in SCHEMA:
            errors.append(f"unknown config key '{key}'")
            continue
        try:
            merged[key] = SCHEMA[key].parse(raw.strip())
        except ValueError as exc:
            errors.append(f"bad value for '{key}': {exc}")
    if errors:
        raise ConfigError("\n".join(errors))
    return merged


def resolve(file_values: dict | None = None, overrides=None, seed: int | None = None) -> dict:
    config = default_config()
    if file_values:
        config.update(file_values)
    if overrides:
        config = apply_overrides(config, overrides)
    if seed is not None:
        config["seed"] = int(seed)
    validate(config)
    return config


def validate(config: dict) -> None:
    """Check cross-field consistency, reporting every failure at once."""
    errors = []
    if config["model.family"] not in _FAMILIES:
        errors.append(
            f"model.family must be one of {', '.join(_FAMILIES)}, "
            f"got '{config['model.family']}'"
        )
    for key in (
        "data.n_samples", "data.text_dim", "data.audio_dim", "model.n_layers",
        "model.rank", "model.context_dim", "train.epochs", "train.batch_size",
        "eval.n_draws", "eval.bins",
    ):
        if config[key] < 1:
            errors.append(f"{key} must be positive, got {config[key]}")
    if config["data.n_classes"] < 2:
        errors.append(f"data.n_classes must be at least 2, got {config['data.n_classes']}")
    if config["eval.folds"] < 2:
        errors.append(f"eval.folds must be at least 2, got {config['eval.folds']}")
    for key in ("model.alpha", "model.epsilon", "train.learning_rate", "train.prior_std"):
        if config[key] <= 0:
            errors.append(f"{key} must be positive, got {config[key]}")
    for key in ("model.delta", "train.weight_decay", "train.kl_weight"):
        if config[key] < 0:
            errors.append(f"{key} must be nonnegative, got {config[key]}")
    if config["data.path"] is None:
        levels = config["data.noise_levels"]
        if not levels:
            errors.append("data.noise_levels must be non-empty")
        elif any(r < 0 or r > 0.5 for r in levels):
            errors.append(f"data.noise_levels must lie in [0, 0.5], got {levels}")
        prior = config["data.class_prior"]
        if prior is not None:
            if len(prior) != config["data.n_classes"]:
                errors.append(
                    f"data.class_prior has {len(prior)} entries for "
                    f"{config['data.n_classes']} classes"
                )
            elif any(p < 0 for p in prior) or abs(sum(prior) - 1.0) > 1e-9:
                errors.append("data.class_prior must be nonnegative and sum to 1")
    unknown = [f for f in config.get("compare.families", ()) if f not in _FAMILIES]
    if unknown:
        errors.append(f"compare.families contains unknown families {unknown}")
    if not config.get("compare.families", ()):
        errors.append("compare.families must be non-empty")
    if not config.get("compare.seeds", ()):
        errors.append("compare.seeds must be non-empty")
    if errors:
        raise ConfigError("\n".join(errors))


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: dict) -> str:
    """Canonical echo of a resolved config; reparses to the same values."""
    lines = [f"{key} = {_format_value(config[key])}" for key in SCHEMA]
    return "\n".join(lines) + "\n"


def synthetic_spec(config: dict) -> SyntheticSpec:
    return SyntheticSpec(
        n_samples=config["data.n_samples"],
        text_dim=config["data.text_dim"],
        audio_dim=config["data.audio_dim"],
        n_classes=config["data.n_classes"],
        noise_levels=config["data.noise_levels"],
        class_prior=config["data.class_prior"],
        seed=config["seed"],
    )


def model_config(config: dict, text_dim: int, audio_dim: int, n_classes: int) -> ModelConfig:
    return ModelConfig(
        family=config["model.family"],
        text_dim=text_dim,
        audio_dim=audio_dim,
        n_layers=config["model.n_layers"],
        rank=config["model.rank"],
        alpha=config["model.alpha"],
        context_dim=config["model.context_dim"],
        n_classes=n_classes,
        epsilon=config["model.epsilon"],
        delta=config["model.delta"],
    )


def train_config(config: dict) -> TrainConfig:
    return TrainConfig(
        epochs=config["train.epochs"],
        batch_size=config["train.batch_size"],
        learning_rate=config["train.learning_rate"],
        weight_decay=config["train.weight_decay"],
        prior_std=config["train.prior_std"],
        kl_weight=config["train.kl_weight"],
    )
