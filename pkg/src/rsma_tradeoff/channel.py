"""Channel generation, scenario container and unit conversions."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np


class InvalidConfigError(ValueError):
    """Raised when a scenario or channel configuration violates its invariants."""


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance.

    ``H`` holds one column per user (shape ``Nt x K``). All powers are in
    linear watts; ``chi`` is in W/(bit/s/Hz).
    """

    H: np.ndarray
    sigma2: np.ndarray
    p_max: float
    p_circuit: float
    chi: float = 0.0
    labels: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
            raise InvalidConfigError(f"H must be a non-empty Nt x K matrix, got shape {H.shape}")
        sigma2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (H.shape[1],)).copy()
        if np.any(sigma2 <= 0):
            raise InvalidConfigError("noise powers must be positive")
        if not self.p_max > 0:
            raise InvalidConfigError("p_max must be positive")
        if not self.p_circuit > 0:
            raise InvalidConfigError("p_circuit must be positive")
        if self.chi < 0:
            raise InvalidConfigError("chi must be nonnegative")
        H.setflags(write=False)
        sigma2.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "p_max", float(self.p_max))
        object.__setattr__(self, "p_circuit", float(self.p_circuit))
        object.__setattr__(self, "chi", float(self.chi))

    @property
    def nt(self) -> int:
        return self.H.shape[0]

    @property
    def n_users(self) -> int:
        return self.H.shape[1]

    def with_chi(self, chi: float) -> "Scenario":
        return Scenario(self.H, self.sigma2, self.p_max, self.p_circuit, chi, dict(self.labels))

    def with_p_max(self, p_max: float) -> "Scenario":
        return Scenario(self.H, self.sigma2, p_max, self.p_circuit, self.chi, dict(self.labels))


@dataclass(frozen=True)
class GeometricChannelConfig:
    nt: int
    angles: Sequence[float]
    gains: Sequence[float] | None = None
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        gains = self.gains if self.gains is not None else [1.0] * len(self.angles)
        if self.nt < 1:
            raise InvalidConfigError("need at least one transmit antenna")
        if len(self.angles) < 1:
            raise InvalidConfigError("need at least one user")
        if len(gains) != len(self.angles):
            raise InvalidConfigError("angles and gains must have the same length")
        if not self.spacing_over_wavelength > 0:
            raise InvalidConfigError("antenna spacing must be positive")
        object.__setattr__(self, "gains", tuple(float(g) for g in gains))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))


def geometric_channels(cfg: GeometricChannelConfig) -> np.ndarray:
    """Uniform-linear-array steering channels, one column per user.

    Column k is ``nu_k * exp(j 2 pi (d/lambda) n cos(theta_k))`` for antenna
    index ``n = 0..Nt-1``.
    """
    n = np.arange(cfg.nt)[:, None]
    phase = 2 * np.pi * cfg.spacing_over_wavelength * n * np.cos(np.asarray(cfg.angles))[None, :]
    return np.asarray(cfg.gains)[None, :] * np.exp(1j * phase)


def random_cscg_channels(nt: int, n_users: int, seed: int | np.random.SeedSequence) -> np.ndarray:
    """I.i.d. unit-variance circularly-symmetric complex Gaussian channels (``nt x n_users``)."""
    if nt < 1 or n_users < 1:
        raise InvalidConfigError("nt and n_users must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    return (rng.standard_normal((nt, n_users)) + 1j * rng.standard_normal((nt, n_users))) / np.sqrt(2.0)


def snr_db_to_pmax(snr_db: float, sigma2: float) -> float:
    if sigma2 <= 0:
        raise InvalidConfigError("sigma2 must be positive")
    return sigma2 * 10.0 ** (snr_db / 10.0)


def pmax_to_snr(p_max: float, sigma2: float) -> float:
    return 10.0 * math.log10(p_max / sigma2)


def dbw_to_watts(dbw: float) -> float:
    return 10.0 ** (dbw / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


_FRACTION = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(value: float | int | str) -> float:
    """Parse an angle in radians; strings like ``"pi/9"``, ``"2pi/9"`` or ``"-pi"`` are accepted."""
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip().lower()
    m = _FRACTION.match(text)
    if m:
        num, den = m.groups()
        coeff = float(num) if num not in ("", "+", "-") else (-1.0 if num == "-" else 1.0)
        return coeff * math.pi / (float(den) if den else 1.0)
    try:
        return float(text)
    except ValueError:
        raise InvalidConfigError(f"cannot parse angle {value!r}") from None


DEFAULT_NOISE_W = 0.01
DEFAULT_PC_W = dbw_to_watts(5.0)
DEFAULT_CHI = 0.1


def build_scenario(
    H: np.ndarray,
    snr_db: float,
    sigma2: float = DEFAULT_NOISE_W,
    p_circuit: float = DEFAULT_PC_W,
    chi: float = DEFAULT_CHI,
    **labels: Any,
) -> Scenario:
    """Scenario with equal noise at every user and ``p_max`` set from the SNR in dB."""
    H = np.asarray(H, dtype=complex)
    labels.setdefault("snr_db", snr_db)
    return Scenario(
        H=H,
        sigma2=np.full(H.shape[1], sigma2),
        p_max=snr_db_to_pmax(snr_db, sigma2),
        p_circuit=p_circuit,
        chi=chi,
        labels=labels,
    )
