"""Exact rate, power and efficiency evaluation for a rate-splitting precoder.

Precoders are complex arrays of shape ``(Nt, K + 1)``: column 0 is the common
stream, column ``k + 1`` the private stream of user ``k`` (0-based users).
Rates are computed in nats/s/Hz; SE and EE are reported in bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import InvalidConfigError, Scenario

LN2 = np.log(2.0)

APPROACHES = ("weighted_sum", "weighted_power")


def check_precoder(F: np.ndarray, s: Scenario) -> np.ndarray:
    F = np.asarray(F, dtype=complex)
    if F.shape != (s.nt, s.n_users + 1):
        raise ValueError(f"precoder must have shape {(s.nt, s.n_users + 1)}, got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("precoder has non-finite entries")
    return F


def is_feasible(F: np.ndarray, s: Scenario, slack: float = 1e-9) -> bool:
    return float(np.sum(np.abs(F) ** 2)) <= s.p_max + slack


def gains(F: np.ndarray, s: Scenario) -> np.ndarray:
    """``G[k, i] = |h_k^H f_i|^2`` for every user k and stream column i."""
    return np.abs(s.H.conj().T @ F) ** 2


def private_denominators(F, s):
    G = gains(F, s)
    return s.sigma2 + G[:, 1:].sum(axis=1) - np.diag(G[:, 1:])


def common_denominators(F, s):
    G = gains(F, s)
    return s.sigma2 + G[:, 1:].sum(axis=1)


def private_rates(F: np.ndarray, s: Scenario) -> np.ndarray:
    """Private-stream rates of all users, nats/s/Hz. The common stream is already cancelled."""
    F = check_precoder(F, s)
    G = gains(F, s)
    signal = np.diag(G[:, 1:])
    return np.log1p(signal / (s.sigma2 + G[:, 1:].sum(axis=1) - signal))


def common_rates(F: np.ndarray, s: Scenario) -> np.ndarray:
    """Common-stream rate achievable at each user, nats/s/Hz (all private streams interfere)."""
    F = check_precoder(F, s)
    G = gains(F, s)
    return np.log1p(G[:, 0] / (s.sigma2 + G[:, 1:].sum(axis=1)))


def private_rate(F: np.ndarray, s: Scenario, k: int) -> float:
    return float(private_rates(F, s)[k])


def common_rate_at_user(F: np.ndarray, s: Scenario, k: int) -> float:
    return float(common_rates(F, s)[k])


def stream_rates(F: np.ndarray, s: Scenario) -> np.ndarray:
    """``[R_c, R_1, ..., R_K]`` in nats with ``R_c`` the worst-user common rate."""
    return np.concatenate([[common_rates(F, s).min()], private_rates(F, s)])


def sum_se(F: np.ndarray, s: Scenario) -> float:
    """Sum spectral efficiency in bit/s/Hz."""
    return float(stream_rates(F, s).sum() / LN2)


def transmit_power(F: np.ndarray) -> float:
    return float(np.sum(np.abs(F) ** 2))


def total_power(F: np.ndarray, s: Scenario, se_bits: float) -> float:
    """Consumed power: transmit + static circuit + rate-proportional processing power."""
    if se_bits < 0:
        raise ValueError(f"spectral efficiency must be nonnegative, got {se_bits}")
    return transmit_power(F) + s.p_circuit + s.chi * se_bits


def energy_efficiency(F: np.ndarray, s: Scenario) -> float:
    se = sum_se(F, s)
    return se / total_power(F, s, se)


def _check_weight(w: float):
    if not 0.0 <= w <= 1.0:
        raise InvalidConfigError(f"weight must lie in [0, 1], got {w}")


def scalarized_objective(approach: str, w: float, F: np.ndarray, s: Scenario,
                         normalizer: float | None = None) -> float:
    """Single-objective value used to trace the SE-EE tradeoff.

    ``weighted_sum``: ``w * EE + (1 - w) * SE / normalizer`` (normalizer defaults to P_c).
    ``weighted_power``: ``SE / (w * (||F||^2 + chi * SE) + P_c)``.
    """
    _check_weight(w)
    se = sum_se(F, s)
    if approach == "weighted_sum":
        norm = s.p_circuit if normalizer is None else normalizer
        return w * se / total_power(F, s, se) + (1.0 - w) * se / norm
    if approach == "weighted_power":
        return se / (w * (transmit_power(F) + s.chi * se) + s.p_circuit)
    raise InvalidConfigError(f"unknown approach {approach!r}; expected one of {APPROACHES}")


@dataclass(frozen=True)
class RateReport:
    private_nats: np.ndarray
    common_per_user_nats: np.ndarray
    common_nats: float
    sum_se_bits: float
    total_power_w: float
    transmit_power_w: float
    ee: float


def rate_report(F: np.ndarray, s: Scenario) -> RateReport:
    private = private_rates(F, s)
    common = common_rates(F, s)
    rc = float(common.min())
    se = float((rc + private.sum()) / LN2)
    p_tot = total_power(F, s, se)
    return RateReport(
        private_nats=private,
        common_per_user_nats=common,
        common_nats=rc,
        sum_se_bits=se,
        total_power_w=p_tot,
        transmit_power_w=transmit_power(F),
        ee=se / p_tot,
    )
