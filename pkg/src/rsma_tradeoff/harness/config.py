"""Experiment configuration: TOML loading, per-experiment defaults and validation."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..channel import (DEFAULT_CHI, DEFAULT_NOISE_W, DEFAULT_PC_W, GeometricChannelConfig, InvalidConfigError,
                       Scenario, build_scenario, dbm_to_watts, dbw_to_watts, geometric_channels, parse_angle,
                       random_cscg_channels)
from ..model import APPROACHES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("tradeoff", "ee-vs-snr", "convergence", "sweep")
CHANNELS = ("geometric", "cscg")
SCA_METHODS = ("RS-SOCP", "RS-GCP", "NoRS-SOCP", "NoRS-GCP")
BASELINE_METHODS = ("RS-D-MMSE", "NoRS-D-MMSE")
METHODS = SCA_METHODS + BASELINE_METHODS

W_GRID = tuple(round(0.1 * i, 10) for i in range(11))
SNR_SWEEP = tuple(float(v) for v in range(0, 41, 5))


@dataclass(frozen=True)
class MethodSpec:
    name: str
    strategy: str
    bound: str | None
    dinkelbach: bool


def parse_method(name: str) -> MethodSpec:
    if name not in METHODS:
        raise InvalidConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    strategy, tail = name.split("-", 1)
    if tail == "D-MMSE":
        return MethodSpec(name, strategy, None, True)
    return MethodSpec(name, strategy, "LB1" if tail == "SOCP" else "LB2", False)


@dataclass(frozen=True)
class ScenarioTemplate:
    """Everything needed to instantiate a :class:`Scenario` except SNR, chi and the channel seed."""

    channel: str = "geometric"
    nt: int = 4
    angles: tuple[float, ...] = (0.0, math.pi / 9)
    gains: tuple[float, ...] | None = None
    spacing_over_wavelength: float = 0.5
    users: tuple[int, ...] | None = None
    noise_w: float = DEFAULT_NOISE_W
    pc_w: float = DEFAULT_PC_W

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise InvalidConfigError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.nt < 1:
            raise InvalidConfigError("nt must be >= 1")
        if not self.noise_w > 0 or not self.pc_w > 0:
            raise InvalidConfigError("noise and circuit power must be positive")
        if self.channel == "geometric":
            GeometricChannelConfig(self.nt, self.angles, self.gains, self.spacing_over_wavelength)
            if self.users is not None and set(self.users) != {len(self.angles)}:
                raise InvalidConfigError("geometric channels take the user count from the angle list")
        elif not self.users or min(self.users) < 1:
            raise InvalidConfigError("cscg channels need users >= 1")

    @property
    def user_counts(self) -> tuple[int, ...]:
        return (len(self.angles),) if self.channel == "geometric" else tuple(self.users)

    def channels(self, n_users: int, seed: int) -> np.ndarray:
        if self.channel == "geometric":
            return geometric_channels(GeometricChannelConfig(self.nt, self.angles, self.gains,
                                                             self.spacing_over_wavelength))
        return random_cscg_channels(self.nt, n_users, seed)

    def scenario(self, n_users: int, snr_db: float, chi: float, seed: int) -> Scenario:
        return build_scenario(self.channels(n_users, seed), snr_db, sigma2=self.noise_w, p_circuit=self.pc_w,
                              chi=chi, seed=seed)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "tradeoff"
    scenario: ScenarioTemplate = field(default_factory=ScenarioTemplate)
    methods: tuple[str, ...] = ("RS-GCP", "NoRS-GCP")
    approaches: tuple[str, ...] = ("weighted_sum",)
    w_grid: tuple[float, ...] = W_GRID
    snr_grid: tuple[float, ...] = (25.0,)
    chi_grid: tuple[float, ...] = (DEFAULT_CHI,)
    trials: int = 1
    seed: int = 0
    out_dir: Path = Path("results")
    tol: float = 1e-6
    max_iters: int = 200
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise InvalidConfigError(f"unknown experiment {self.kind!r}")
        for name in ("methods", "approaches", "w_grid", "snr_grid", "chi_grid"):
            if len(getattr(self, name)) == 0:
                raise InvalidConfigError(f"{name} must be non-empty")
        for m in self.methods:
            parse_method(m)
        for a in self.approaches:
            if a not in APPROACHES:
                raise InvalidConfigError(f"unknown approach {a!r}")
        if any(not 0.0 <= w <= 1.0 for w in self.w_grid):
            raise InvalidConfigError("weights must lie in [0, 1]")
        if any(c < 0 for c in self.chi_grid):
            raise InvalidConfigError("chi must be nonnegative")
        if self.trials < 1:
            raise InvalidConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigError("seed must be an unsigned 64-bit integer")
        if not self.tol > 0 or self.max_iters < 1 or self.workers < 1:
            raise InvalidConfigError("tol, max_iters and workers must be positive")
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["out_dir"] = str(self.out_dir)
        return d


def default_config(kind: str) -> ExperimentConfig:
    """Defaults that reproduce each figure-style experiment at desk scale."""
    if kind == "tradeoff":
        return ExperimentConfig(kind, approaches=("weighted_sum", "weighted_power"))
    if kind == "ee-vs-snr":
        return ExperimentConfig(kind, methods=METHODS, w_grid=(0.0, 1.0), snr_grid=SNR_SWEEP)
    if kind == "convergence":
        return ExperimentConfig(kind, scenario=ScenarioTemplate(angles=(0.0, math.pi / 9, 2 * math.pi / 9)),
                                methods=METHODS, w_grid=(0.5,), snr_grid=(20.0,))
    if kind == "sweep":
        return ExperimentConfig(kind, scenario=ScenarioTemplate(channel="cscg", users=(2,)),
                                w_grid=(0.0, 0.5, 1.0), trials=50)
    raise InvalidConfigError(f"unknown experiment {kind!r}")


_SCENARIO_KEYS = {"channel", "nt", "angles", "gains", "spacing_over_wavelength", "users",
                  "noise_w", "noise_dbw", "noise_dbm", "pc_w", "pc_dbw"}
_EXPERIMENT_KEYS = {"methods", "approaches", "w", "snr_db", "chi", "trials", "seed", "out_dir",
                    "tol", "max_iters", "workers", "timing"}


def _as_tuple(value, cast=float) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return (cast(value),)


def _power(table: dict, stem: str) -> float | None:
    given = [k for k in (f"{stem}_w", f"{stem}_dbw", f"{stem}_dbm") if k in table]
    if len(given) > 1:
        raise InvalidConfigError(f"give only one of {', '.join(given)}")
    if not given:
        return None
    key = given[0]
    value = float(table[key])
    if key.endswith("_dbw"):
        return dbw_to_watts(value)
    if key.endswith("_dbm"):
        return dbm_to_watts(value)
    return value


def _scenario_from_table(table: dict, base: ScenarioTemplate) -> ScenarioTemplate:
    unknown = set(table) - _SCENARIO_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown scenario keys: {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key in ("channel", "nt", "spacing_over_wavelength"):
        if key in table:
            kw[key] = table[key]
    if "angles" in table:
        kw["angles"] = tuple(parse_angle(a) for a in table["angles"])
        if "gains" not in table:
            kw["gains"] = None
    if "gains" in table:
        kw["gains"] = _as_tuple(table["gains"])
    if "users" in table:
        kw["users"] = _as_tuple(table["users"], int)
    elif kw.get("channel", base.channel) == "geometric":
        kw["users"] = None
    noise, pc = _power(table, "noise"), _power(table, "pc")
    if noise is not None:
        kw["noise_w"] = noise
    if pc is not None:
        kw["pc_w"] = pc
    return replace(base, **kw)


def config_from_dict(data: dict, kind: str) -> ExperimentConfig:
    base = default_config(kind)
    unknown = set(data) - {"scenario", "experiment"}
    if unknown:
        raise InvalidConfigError(f"unknown top-level tables: {sorted(unknown)}")
    scenario = _scenario_from_table(data.get("scenario", {}), base.scenario)
    exp = data.get("experiment", {})
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown experiment keys: {sorted(unknown)}")
    kw: dict[str, Any] = {"scenario": scenario}
    renames = {"w": ("w_grid", float), "snr_db": ("snr_grid", float), "chi": ("chi_grid", float),
               "methods": ("methods", str), "approaches": ("approaches", str)}
    for key, (attr, cast) in renames.items():
        if key in exp:
            kw[attr] = _as_tuple(exp[key], cast)
    for key in ("trials", "seed", "max_iters", "workers"):
        if key in exp:
            kw[key] = int(exp[key])
    if "tol" in exp:
        kw["tol"] = float(exp["tol"])
    if "timing" in exp:
        kw["timing"] = bool(exp["timing"])
    if "out_dir" in exp:
        kw["out_dir"] = Path(exp["out_dir"])
    return replace(base, **kw)


def load_config(path: str | Path, kind: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, kind)
