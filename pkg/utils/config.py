"""Flat key=value run configuration

Every key lives on RunConfig. A config file holds one ``key=value`` per line
with ``#`` comments; command-line flags are applied on top of it.
"""

import dataclasses
import typing
from dataclasses import dataclass

from training.train_config import TrainConfig
from utils.errors import ConfigError, LinfError

TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


@dataclass
class RunConfig(TrainConfig):
    """Training keys (inherited) plus data, attack, ensemble, bound and logging keys"""
    # data: 'idx' (MNIST-format files), 'corners' (synthetic) or 'cache' (DATA files)
    dataset: str = "idx"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    train_cache: str = ""
    test_cache: str = ""
    train_limit: int = 0
    test_limit: int = 1000
    corners_k: int = 2
    corners_d: int = 16
    corners_gap: float = 0.5
    corners_n: int = 100
    corners_test_n: int = 50
    data_seed: int = 0

    # attack (step size 0 means epsilon / 4)
    attack_steps: int = 20
    attack_step_size: float = 0.0
    attack_restarts: int = 1
    attack_seed: int = 0

    # ensemble (base_seed -1 means seed)
    ensemble_m: int = 5
    ensemble_mode: str = "fusion"
    base_seed: int = -1

    # bounds
    theorem: int = 3
    bound_t: float = 0.1
    bound_r: float = 0.25
    bound_C: float = 1.0
    delta_grid: str = "0.1:1.0:10"
    margins_file: str = ""
    rho_file: str = ""

    # class gap (gap_full lifts the sample cap)
    gap_limit: int = 2000
    gap_full: bool = False
    gap_units: str = "auto"

    # gradient check
    gradcheck_configs: int = 50
    gradcheck_tol: float = 1e-4

    # outputs, logging and workers
    out: str = "model.lnfc"
    metrics: str = ""
    report: str = ""
    model: str = ""
    log_level: str = "INFO"
    log_dir: str = ""
    threads: int = 0

    def validate(self):
        try:
            super().validate()
        except LinfError as e:
            raise ConfigError(str(e)) from e
        if self.dataset not in ("idx", "corners", "cache"):
            raise ConfigError(f"Unknown dataset kind: {self.dataset}")
        if self.ensemble_mode not in ("fusion", "voting"):
            raise ConfigError(f"Unknown ensemble mode: {self.ensemble_mode}")
        if self.theorem not in (2, 3):
            raise ConfigError(f"theorem must be 2 or 3, got {self.theorem}")
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0, got {self.threads}")
        return self

    def to_train_config(self):
        names = [f.name for f in dataclasses.fields(TrainConfig)]
        return TrainConfig(**{name: getattr(self, name) for name in names})

    def resolved_base_seed(self):
        return self.seed if self.base_seed < 0 else self.base_seed


def _field_types():
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(RunConfig)}


def coerce_value(key, text, kind):
    """Convert config text to the field's type"""
    text = str(text).strip()
    origin = typing.get_origin(kind)
    if origin is typing.Union:
        if text.lower() in ("", "none", "null"):
            return None
        kind = next(arg for arg in typing.get_args(kind) if arg is not type(None))
        origin = typing.get_origin(kind)
    try:
        if kind is bool:
            if text.lower() in TRUE_WORDS:
                return True
            if text.lower() in FALSE_WORDS:
                return False
            raise ValueError(f"not a boolean: {text}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is list or origin is list:
            return [int(v) for v in text.split(",") if v.strip()]
        return text
    except ValueError as e:
        raise ConfigError(f"Bad value for '{key}': {e}") from None


def format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config_text(text, source="<config>"):
    """Parse key=value lines into typed values

    Raises:
        ConfigError: malformed line, unknown key or uncoercible value
    """
    types = _field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got '{line}'")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        values[key] = coerce_value(key, value, types[key])
    return values


def load_config(path=None):
    """RunConfig from a file (defaults when path is empty)"""
    if not path:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    return RunConfig(**parse_config_text(text, path))


def apply_overrides(cfg, overrides):
    """Copy of cfg with overrides applied; string values are coerced

    Args:
        cfg (RunConfig): Base config
        overrides (dict): key -> value; None values are skipped
    """
    types = _field_types()
    changes = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in types:
            raise ConfigError(f"Unknown key '{key}'")
        changes[key] = coerce_value(key, value, types[key]) if isinstance(value, str) else value
    return dataclasses.replace(cfg, **changes)


def parse_set_flags(pairs):
    """['key=value', ...] from repeated --set flags into a dict"""
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got '{pair}'")
        overrides[key.strip()] = value
    return overrides


def format_defaults():
    """Every key with its default, one key=value per line"""
    cfg = RunConfig()
    return "\n".join(f"{f.name}={format_value(getattr(cfg, f.name))}" for f in dataclasses.fields(cfg))
