"""Experiment configuration: a flat TOML file of typed keys, plus named presets.

Every key is optional and falls back to the defaults below; unknown keys
are errors. ``t_max`` / ``t_min`` may be a list with one value per grade.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .nn import FULL, TrainConfig
from .engine import GradeSpec

TASKS = ("synthetic-1", "synthetic-2", "synthetic-3", "synthetic-4",
         "manifold-1", "manifold-2", "image", "mnist")
METHODS = ("mgdl", "sgdl")


@dataclass
class ExperimentConfig:
    task: str = "synthetic-1"
    method: str = "mgdl"
    # architecture
    grades: int = 3
    grade_hidden_layers: int = 2
    width: int = 32
    sgdl_hidden_layers: int = 0      # 0 -> grades * grade_hidden_layers
    # optimisation
    epochs: int = 2000               # per grade
    sgdl_epochs: int = 0             # 0 -> grades * epochs
    t_max: float | list = 5e-3
    t_min: float | list = 1e-4
    batch_size: int | str = 128
    seed: int = 0
    # 1-D targets
    M: int = 5
    kappa_step: float = 2.0
    phase_seed: int = 0
    val_seed: int = 0
    test_seed: int = 1
    n_train: int = 6000
    n_val: int = 2000
    n_test: int = 2000
    q: int = 4
    # image
    image_path: str = ""             # empty -> built-in 64x64 test card
    stride: int = 2
    # mnist
    mnist_dir: str = ""
    beta: float = 1.0
    kappa: float = 1.0
    split_seed: int = 0
    # diagnostics and output
    snapshot_every: int = 20
    spectrum_n: int = 256
    export_data: bool = False
    output_dir: str = "runs/experiment"

    # -- derived ----------------------------------------------------------

    @property
    def is_1d(self) -> bool:
        return self.task.startswith(("synthetic", "manifold"))

    @property
    def setting(self) -> int:
        return int(self.task.rsplit("-", 1)[1])

    def total_sgdl_hidden(self) -> int:
        return self.sgdl_hidden_layers or self.grades * self.grade_hidden_layers

    def total_sgdl_epochs(self) -> int:
        return self.sgdl_epochs or self.grades * self.epochs

    def _rate(self, name: str, grade: int) -> float:
        v = getattr(self, name)
        if isinstance(v, list):
            return float(v[grade - 1])
        return float(v)

    def train_config(self, grade: int = 1) -> TrainConfig:
        return TrainConfig(self._rate("t_max", grade), self._rate("t_min", grade),
                           self.epochs, self.batch_size, self.seed)

    def grade_specs(self) -> list[GradeSpec]:
        hidden = (self.width,) * self.grade_hidden_layers
        return [GradeSpec(hidden, self.train_config(l)) for l in range(1, self.grades + 1)]

    def sgdl_train_config(self) -> TrainConfig:
        return TrainConfig(self._rate("t_max", 1), self._rate("t_min", 1),
                           self.total_sgdl_epochs(), self.batch_size, self.seed)

    def sgdl_hidden_widths(self) -> tuple[int, ...]:
        return (self.width,) * self.total_sgdl_hidden()

    # -- validation -------------------------------------------------------

    def violations(self) -> list[str]:
        out = []
        if self.task not in TASKS:
            out.append(f"task: must be one of {', '.join(TASKS)}; got {self.task!r}")
        if self.method not in METHODS:
            out.append(f"method: must be 'mgdl' or 'sgdl'; got {self.method!r}")
        if self.grades < 1:
            out.append(f"grades: MGDL requires at least 1 grade; got {self.grades}")
        if self.grade_hidden_layers < 1:
            out.append("grade_hidden_layers: each grade needs >= 1 hidden layer")
        if self.width < 1:
            out.append("width: must be >= 1")
        if self.sgdl_hidden_layers < 0:
            out.append("sgdl_hidden_layers: must be >= 0 (0 means grades * grade_hidden_layers)")
        if self.epochs < 1:
            out.append(f"epochs: must be >= 1; got {self.epochs}")
        if self.sgdl_epochs < 0:
            out.append("sgdl_epochs: must be >= 0 (0 means grades * epochs)")
        for name in ("t_max", "t_min"):
            v = getattr(self, name)
            if isinstance(v, list) and len(v) != max(self.grades, 1):
                out.append(f"{name}: list needs one value per grade ({self.grades}), got {len(v)}")
        n_rates = len(self.t_max) if isinstance(self.t_max, list) else None
        n_rates = n_rates or (len(self.t_min) if isinstance(self.t_min, list) else 1)
        for l in range(1, min(n_rates, max(self.grades, 1)) + 1):
            try:
                hi, lo = self._rate("t_max", l), self._rate("t_min", l)
            except (IndexError, TypeError, ValueError):
                continue
            if not (lo > 0 and lo <= hi and math.isfinite(hi)):
                out.append(f"t_min/t_max: need 0 < t_min <= t_max (grade {l}: t_min={lo}, t_max={hi})")
        if not (self.batch_size == FULL or (isinstance(self.batch_size, int) and self.batch_size >= 1)):
            out.append(f"batch_size: must be 'full' or a positive integer; got {self.batch_size!r}")
        if self.M < 1:
            out.append("M: must be >= 1")
        if self.kappa_step <= 0:
            out.append("kappa_step: must be > 0")
        for name in ("n_train", "n_val", "n_test"):
            if getattr(self, name) < 1:
                out.append(f"{name}: must be >= 1")
        if self.q < 0:
            out.append(f"q: manifold petal count must be >= 0; got {self.q}")
        if self.stride < 1:
            out.append("stride: must be >= 1")
        if self.beta < 0:
            out.append("beta: must be >= 0")
        if self.kappa <= 0:
            out.append("kappa: must be > 0")
        if self.snapshot_every < 0:
            out.append("snapshot_every: must be >= 0")
        if self.is_1d and self.task in TASKS:
            if self.spectrum_n < 2:
                out.append("spectrum_n: must be >= 2")
            elif self.kappa_step * self.M > self.spectrum_n // 2:
                out.append(f"spectrum_n: highest target frequency {self.kappa_step * self.M:g} "
                           f"exceeds Nyquist {self.spectrum_n // 2}")
            elif abs(self.kappa_step - round(self.kappa_step)) > 1e-12:
                out.append("kappa_step: must be an integer so frequencies sit on DFT bins")
        if self.task == "mnist" and not self.mnist_dir:
            out.append("mnist_dir: required for the mnist task")
        if self.task == "image" and self.image_path and not Path(self.image_path).is_file():
            out.append(f"image_path: file not found: {self.image_path}")
        if self.task == "mnist" and self.mnist_dir and not Path(self.mnist_dir).is_dir():
            out.append(f"mnist_dir: directory not found: {self.mnist_dir}")
        return out

    def check(self) -> "ExperimentConfig":
        bad = self.violations()
        if bad:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(bad))
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, value):
    """Type-check one raw value against the field's declared type."""
    default = _FIELDS[key].default
    if key in ("t_max", "t_min"):
        if isinstance(value, list):
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise ConfigError(f"{key}: list entries must be numbers")
            return [float(v) for v in value]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{key}: expected a number or list of numbers, got {value!r}")
    if key == "batch_size":
        if isinstance(value, str) and value.lower() == FULL:
            return FULL
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"batch_size: expected an integer or 'full', got {value!r}")
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key}: expected true/false, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, str):
        return value
    raise ConfigError(f"{key}: expected a string, got {value!r}")


def from_mapping(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = (base or ExperimentConfig()).to_dict()
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"{key}: nested tables are not allowed; the format is flat")
        values[key] = _coerce(key, value)
    return ExperimentConfig(**values)


def parse_assignment(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as a TOML scalar (bare words become strings)."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


# Desk-scale presets run in seconds to minutes; *-paper presets mirror the
# published experiment sizes and take hours.
PRESETS: dict[str, dict] = {
    "synthetic-1": {"task": "synthetic-1", "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "synthetic-2": {"task": "synthetic-2", "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "synthetic-3": {"task": "synthetic-3", "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "synthetic-4": {"task": "synthetic-4", "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "manifold-1": {"task": "manifold-1", "q": 4, "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "manifold-2": {"task": "manifold-2", "q": 4, "n_train": 4000, "n_val": 1000, "n_test": 1000},
    "image": {"task": "image", "grades": 4, "grade_hidden_layers": 3, "width": 64,
              "epochs": 1500, "batch_size": FULL, "t_max": 2e-3, "t_min": 2e-3,
              "snapshot_every": 0},
    "mnist": {"task": "mnist", "width": 128, "epochs": 100, "batch_size": FULL,
              "t_max": 1e-3, "t_min": 1e-4, "n_train": 45000, "n_val": 15000,
              "n_test": 10000, "snapshot_every": 0},
    "synthetic-1-paper": {"task": "synthetic-1", "M": 20, "kappa_step": 10.0, "width": 256,
                          "grades": 4, "epochs": 30000, "batch_size": 256,
                          "t_max": 1e-4, "t_min": 1e-4, "spectrum_n": 1024, "snapshot_every": 100},
    "synthetic-4-paper": {"task": "synthetic-4", "M": 20, "kappa_step": 10.0, "width": 256,
                          "grades": 5, "epochs": 30000, "batch_size": FULL,
                          "t_max": 1e-4, "t_min": 1e-4, "spectrum_n": 1024, "snapshot_every": 100},
    "manifold-1-paper": {"task": "manifold-1", "M": 40, "kappa_step": 10.0, "q": 0, "width": 256,
                         "grades": 4, "epochs": 30000, "batch_size": FULL, "t_max": 1e-3,
                         "t_min": 1e-4, "n_train": 12000, "n_val": 4000, "n_test": 4000,
                         "spectrum_n": 1024, "snapshot_every": 100},
    "image-paper": {"task": "image", "grades": 4, "grade_hidden_layers": 3, "width": 256,
                    "epochs": 10000, "batch_size": FULL, "t_max": [1e-3, 1e-3, 5e-4, 5e-4],
                    "t_min": [1e-3, 1e-3, 5e-4, 5e-4], "snapshot_every": 0},
    "mnist-paper": {"task": "mnist", "width": 128, "epochs": 2000, "batch_size": FULL,
                    "t_max": 1e-4, "t_min": 1e-5, "n_train": 45000, "n_val": 15000,
                    "n_test": 10000, "snapshot_every": 0},
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    cfg = from_mapping(PRESETS[name])
    cfg.output_dir = f"runs/{name}"
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    return from_mapping(data)


def resolve(target: str, overrides: dict | None = None) -> ExperimentConfig:
    """A preset name or a config path, with optional key overrides applied."""
    if target in PRESETS:
        cfg = preset(target)
    elif Path(target).exists() or target.endswith(".toml"):
        cfg = load(target)
    else:
        raise ConfigError(f"{target!r} is neither a preset ({', '.join(PRESETS)}) nor a config file")
    if overrides:
        cfg = from_mapping(overrides, base=cfg)
    return cfg


def dumps(cfg: ExperimentConfig) -> str:
    """Render a config as flat TOML that :func:`load` reads back unchanged."""
    lines = []
    for key, value in cfg.to_dict().items():
        lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'
