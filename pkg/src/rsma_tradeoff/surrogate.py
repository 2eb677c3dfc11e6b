"""Concave minorants used by the SCA subproblems.

Three bounds are built at an expansion point:

* the linearisation of the quadratic-over-linear function ``x^2 / y``;
* LB I, a first-order minorant of the whole log-rate (SOC representable);
* LB II, a minorant of the SINR fraction only, keeping the exact log.

The weighted-MMSE form of LB I is provided separately so the two
constructions can be checked against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import Scenario
from .model import check_precoder


class Stream(NamedTuple):
    """A rate expression: private stream of ``user``, or the common stream decoded at ``user``."""

    kind: str
    user: int

    @classmethod
    def private(cls, k: int) -> "Stream":
        return cls("private", k)

    @classmethod
    def common(cls, k: int) -> "Stream":
        return cls("common", k)

    @property
    def column(self) -> int:
        return 0 if self.kind == "common" else self.user + 1

    def interferers(self, n_users: int) -> np.ndarray:
        """Columns treated as noise when decoding this stream."""
        cols = np.arange(1, n_users + 1)
        if self.kind == "private":
            return cols[cols != self.column]
        if self.kind == "common":
            return cols
        raise ValueError(f"unknown stream kind {self.kind!r}")


def _signal_and_interference(F, s: Scenario, stream: Stream):
    h = s.H[:, stream.user]
    proj = h.conj() @ F
    interference = s.sigma2[stream.user] + np.sum(np.abs(proj[stream.interferers(s.n_users)]) ** 2)
    return h, proj[stream.column], interference


def sinr(F: np.ndarray, s: Scenario, stream: Stream) -> float:
    F = check_precoder(F, s)
    _, x, r_minus = _signal_and_interference(F, s, stream)
    return float(abs(x) ** 2 / r_minus)


def rate(F: np.ndarray, s: Scenario, stream: Stream) -> float:
    return float(np.log1p(sinr(F, s, stream)))


@dataclass(frozen=True)
class PhiCoeffs:
    slope_x: float
    slope_y: float

    def __call__(self, x, y):
        return self.slope_x * x + self.slope_y * y


def phi_coeffs(x_n: float, y_n: float) -> PhiCoeffs:
    """Tangent plane of ``x^2 / y`` at ``(x_n, y_n)``; a global minorant for ``y > 0``."""
    if not y_n > 0:
        raise ValueError(f"expansion point needs y > 0, got {y_n}")
    ratio = x_n / y_n
    return PhiCoeffs(slope_x=2.0 * ratio, slope_y=-ratio * ratio)


@dataclass(frozen=True)
class Lb1Coeffs:
    a: float
    b: np.ndarray
    const: float
    stream: Stream

    def decoded_columns(self, n_users: int) -> np.ndarray:
        """Columns entering the quadratic penalty: the decoded stream plus its interferers."""
        return np.sort(np.append(self.stream.interferers(n_users), self.stream.column))


def lb1_coeffs(F_n: np.ndarray, s: Scenario, stream: Stream) -> Lb1Coeffs:
    """Expansion coefficients of the log-rate minorant at ``F_n`` (nats).

    The bound reads ``const + 2 a Re{b^H f} - a * sum_i |b^H f_i|^2`` where
    ``f`` is the decoded stream and ``i`` runs over that stream and its
    interferers.
    """
    F_n = check_precoder(F_n, s)
    h, x, r_minus = _signal_and_interference(F_n, s, stream)
    sig = abs(x) ** 2
    a = 1.0 + sig / r_minus
    b = (x / (r_minus + sig)) * h
    coeffs = Lb1Coeffs(a=float(a), b=b, const=0.0, stream=stream)
    lin, quad = _lb1_terms(coeffs, F_n, s.n_users)
    const = float(np.log1p(sig / r_minus)) - lin + quad
    return Lb1Coeffs(a=float(a), b=b, const=const, stream=stream)


def _lb1_terms(c: Lb1Coeffs, F, n_users):
    proj = c.b.conj() @ F
    lin = 2.0 * c.a * np.real(proj[c.stream.column])
    quad = c.a * np.sum(np.abs(proj[c.decoded_columns(n_users)]) ** 2)
    return float(lin), float(quad)


def lb1_eval(coeffs: Lb1Coeffs, F: np.ndarray) -> float:
    lin, quad = _lb1_terms(coeffs, np.asarray(F, dtype=complex), F.shape[1] - 1)
    return coeffs.const + lin - quad


@dataclass(frozen=True)
class Lb2Coeffs:
    """SINR minorant ``Re{lin^H f} - quad_weight * (noise + sum_i |h^H f_i|^2)``."""

    lin: np.ndarray
    quad_weight: float
    h: np.ndarray
    noise: float
    stream: Stream


def lb2_coeffs(F_n: np.ndarray, s: Scenario, stream: Stream) -> Lb2Coeffs:
    F_n = check_precoder(F_n, s)
    h, x, r_minus = _signal_and_interference(F_n, s, stream)
    # the common-stream coefficient uses the common precoder's projection
    return Lb2Coeffs(
        lin=2.0 * h * x / r_minus,
        quad_weight=float(abs(x / r_minus) ** 2),
        h=h,
        noise=float(s.sigma2[stream.user]),
        stream=stream,
    )


def lb2_eval(coeffs: Lb2Coeffs, F: np.ndarray) -> float:
    F = np.asarray(F, dtype=complex)
    proj = coeffs.h.conj() @ F
    interference = coeffs.noise + np.sum(np.abs(proj[coeffs.stream.interferers(F.shape[1] - 1)]) ** 2)
    return float(np.real(np.vdot(coeffs.lin, F[:, coeffs.stream.column])) - coeffs.quad_weight * interference)


@dataclass(frozen=True)
class WmmseCoeffs:
    equalizer: complex
    mse_floor: float
    const_mmse: float
    h: np.ndarray
    stream: Stream

    def as_lb1(self) -> Lb1Coeffs:
        """Rewrite the MSE-based bound in LB I form (``a = 1/q``, ``b = h w``)."""
        return Lb1Coeffs(a=1.0 / self.mse_floor, b=self.h * self.equalizer,
                         const=self.const_mmse, stream=self.stream)


def wmmse_coeffs(F_n: np.ndarray, s: Scenario, stream: Stream) -> WmmseCoeffs:
    """MMSE equalizer, minimum MSE and bound constant at ``F_n`` (nats)."""
    F_n = check_precoder(F_n, s)
    h, x, r_minus = _signal_and_interference(F_n, s, stream)
    r_total = r_minus + abs(x) ** 2
    w = x / r_total
    q = 1.0 - abs(x) ** 2 / r_total
    sigma2 = s.sigma2[stream.user]
    const = -np.log(q) + 1.0 - sigma2 * abs(w) ** 2 / q - 1.0 / q
    return WmmseCoeffs(equalizer=complex(w), mse_floor=float(q), const_mmse=float(const), h=h, stream=stream)


def wmmse_eval(coeffs: WmmseCoeffs, F: np.ndarray) -> float:
    """``const - (e - sigma^2 |w|^2 - 1) / q`` where ``e`` is the MSE with the fixed equalizer."""
    F = np.asarray(F, dtype=complex)
    proj = coeffs.h.conj() @ F
    cols = np.append(coeffs.stream.interferers(F.shape[1] - 1), coeffs.stream.column)
    w, q = coeffs.equalizer, coeffs.mse_floor
    received = np.sum(np.abs(proj[cols]) ** 2)
    cross = np.real(np.conj(w) * proj[coeffs.stream.column])
    return float(coeffs.const_mmse + 2.0 * cross / q - received * abs(w) ** 2 / q)


def stream_list(n_users: int, rate_splitting: bool = True) -> list[Stream]:
    streams = [Stream.private(k) for k in range(n_users)]
    if rate_splitting:
        streams += [Stream.common(k) for k in range(n_users)]
    return streams
