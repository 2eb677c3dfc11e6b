"""Convex SCA subproblems for the weighted-sum and weighted-power scalarizations.

Every subproblem is built around an expansion point (:class:`SCAState`) and
uses rates in nats. ``bound="LB1"`` gives a second-order cone program,
``bound="LB2"`` adds one exponential cone per rate expression.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import InvalidConfigError, Scenario
from .conic import Affine, ConicProgram, ConicSolution, embed_complex, extract_complex, imag_part, real_part
from .model import (APPROACHES, LN2, check_precoder, energy_efficiency, scalarized_objective, stream_rates, sum_se,
                    transmit_power)
from .surrogate import Stream, lb1_coeffs, lb2_coeffs, phi_coeffs, sinr, stream_list, wmmse_coeffs

BOUNDS = ("LB1", "LB2")
STRATEGIES = ("RS", "NoRS")
# single-objective special cases: plain SE maximization and plain EE maximization
DEDICATED = ("se", "ee")


class SubproblemError(RuntimeError):
    """The expansion point or the solver output cannot be turned into a valid iterate."""


@dataclass(frozen=True)
class SubproblemSpec:
    approach: str = "weighted_sum"
    bound: str = "LB2"
    strategy: str = "RS"
    w: float = 0.5
    normalizer: float | None = None

    def __post_init__(self):
        if self.approach not in APPROACHES + DEDICATED:
            raise InvalidConfigError(f"unknown approach {self.approach!r}")
        if self.bound not in BOUNDS:
            raise InvalidConfigError(f"unknown bound {self.bound!r}")
        if self.strategy not in STRATEGIES:
            raise InvalidConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.w <= 1.0:
            raise InvalidConfigError(f"weight must lie in [0, 1], got {self.w}")

    @property
    def rate_splitting(self) -> bool:
        return self.strategy == "RS"

    def norm(self, s: Scenario) -> float:
        return s.p_circuit if self.normalizer is None else self.normalizer

    @property
    def has_ee_block(self) -> bool:
        # the EE epigraph carries zero weight in the weighted-sum objective at w = 0
        return self.approach != "se" and not (self.approach == "weighted_sum" and self.w == 0.0)

    def objective(self, F: np.ndarray, s: Scenario) -> float:
        """Exact (bit-unit) objective this subproblem family maximizes."""
        if self.approach == "se":
            return sum_se(F, s)
        if self.approach == "ee":
            return energy_efficiency(F, s)
        return scalarized_objective(self.approach, self.w, F, s, self.normalizer)


@dataclass(frozen=True)
class SCAState:
    """Expansion point: precoder, sqrt-sum-rate ``x``, power ``y`` and stream rates (nats)."""

    F: np.ndarray
    x: float
    y: float
    r: np.ndarray
    objective: float


def initial_precoder(s: Scenario, rate_splitting: bool = True) -> np.ndarray:
    """Matched-filter start at full power, split equally over the active streams."""
    K = s.n_users
    directions = s.H / np.linalg.norm(s.H, axis=0, keepdims=True)
    F = np.zeros((s.nt, K + 1), dtype=complex)
    n_streams = K + 1 if rate_splitting else K
    p = s.p_max / n_streams
    F[:, 1:] = np.sqrt(p) * directions
    if rate_splitting:
        u = directions.sum(axis=1)
        if np.linalg.norm(u) < 1e-9 * K:
            u = directions[:, 0]
        F[:, 0] = np.sqrt(p) * u / np.linalg.norm(u)
    return F


def power_surrogate(spec: SubproblemSpec, F: np.ndarray, s: Scenario, se_bits: float) -> float:
    """Value of the power variable that makes the power-accounting row tight."""
    if spec.approach != "weighted_power":
        return transmit_power(F) + s.p_circuit + s.chi * se_bits
    return spec.w * (transmit_power(F) + s.chi * se_bits) + s.p_circuit


def state_from_precoder(spec: SubproblemSpec, F: np.ndarray, s: Scenario) -> SCAState:
    """Tight expansion point at ``F``: every auxiliary variable equals its exact counterpart."""
    F = check_precoder(F, s)
    r = stream_rates(F, s)
    se = float(r.sum() / LN2)
    return SCAState(
        F=F,
        x=float(np.sqrt(r.sum())),
        y=power_surrogate(spec, F, s, se),
        r=r,
        objective=spec.objective(F, s),
    )


def initialize(spec: SubproblemSpec, s: Scenario) -> SCAState:
    return state_from_precoder(spec, initial_precoder(s, spec.rate_splitting), s)


class _Layout:
    """Maps precoder columns to their embedded indices inside a program."""

    def __init__(self, p: ConicProgram, s: Scenario, rate_splitting: bool):
        self.columns = list(range(0 if rate_splitting else 1, s.n_users + 1))
        self.nt = s.nt
        self.f = p.add_vars("F", 2 * s.nt * len(self.columns))
        self.pos = {c: j for j, c in enumerate(self.columns)}

    def col(self, c: int) -> np.ndarray:
        j = self.pos[c]
        return self.f[2 * self.nt * j: 2 * self.nt * (j + 1)]

    def power_terms(self) -> list[Affine]:
        return [Affine.var(i) for i in self.f]

    def proj(self, c_vec: np.ndarray, col: int, scale: float = 1.0) -> list[Affine]:
        """``scale * (Re, Im)`` of ``c_vec^H f_col``."""
        idx = self.col(col)
        return [real_part(c_vec, idx) * scale, imag_part(c_vec, idx) * scale]


def _add_power_budget(p: ConicProgram, lay: _Layout, s: Scenario):
    p.add_soc(np.sqrt(s.p_max), lay.power_terms(), name="power_budget")


def _add_lb1_row(p: ConicProgram, lay: _Layout, r: Affine, c, n_users: int, name: str):
    """``r <= const + 2a Re{b^H f} - a sum_i |b^H f_i|^2`` as a rotated cone.

    The row is divided by ``a``: at high SNR ``a`` is large and the unscaled
    head is a small rate written as the difference of two large numbers.
    """
    head = real_part(c.b, lay.col(c.stream.column)) * 2.0 + (c.const - r) * (1.0 / c.a)
    rest = [e for col in c.decoded_columns(n_users) if col in lay.pos for e in lay.proj(c.b, col)]
    p.add_rsoc(head, 0.5, rest, name=name)


def _add_lb2_rows(p: ConicProgram, lay: _Layout, r: Affine, gamma: Affine, c, n_users: int, name: str):
    p.add_exp(r, 1.0, gamma + 1.0, name=f"{name}_log")
    head = real_part(c.lin, lay.col(c.stream.column)) - c.quad_weight * c.noise - gamma
    sq = np.sqrt(c.quad_weight)
    rest = []
    if sq > 0:
        rest = [e for col in c.stream.interferers(n_users) if col in lay.pos for e in lay.proj(c.h, col, sq)]
    p.add_rsoc(head, 0.5, rest, name=f"{name}_sinr")


def _rate_vars(p: ConicProgram, s: Scenario, rate_splitting: bool):
    K = s.n_users
    idx = p.add_vars("r", K + 1 if rate_splitting else K)
    # no sign constraint: r >= 0 pins a vanishing stream to a sliver of the
    # exp cone at the origin and stalls the interior-point method
    r = [Affine.var(i) for i in idx]
    common = r[0] if rate_splitting else None
    private = r[1:] if rate_splitting else r
    return r, common, private


def _add_rate_rows(p, lay, bound, s, F_n, common, private, rate_splitting, coeff_source="direct"):
    K = s.n_users
    if bound == "LB1":
        for st in stream_list(K, rate_splitting):
            if coeff_source == "wmmse":
                c = wmmse_coeffs(F_n, s, st).as_lb1()
            else:
                c = lb1_coeffs(F_n, s, st)
            target = private[st.user] if st.kind == "private" else common
            _add_lb1_row(p, lay, target, c, K, name=f"{st.kind}{st.user}")
        return
    g = [Affine.var(i) for i in p.add_vars("gamma", K)]
    gc = [Affine.var(i) for i in p.add_vars("gamma_c", K)] if rate_splitting else []
    for st in stream_list(K, rate_splitting):
        c = lb2_coeffs(F_n, s, st)
        if st.kind == "private":
            _add_lb2_rows(p, lay, private[st.user], g[st.user], c, K, name=f"private{st.user}")
        else:
            _add_lb2_rows(p, lay, common, gc[st.user], c, K, name=f"common{st.user}")


def build(spec: SubproblemSpec, state: SCAState, s: Scenario) -> ConicProgram:
    """Convex subproblem whose optimum is the next SCA iterate."""
    F_n = check_precoder(state.F, s)
    if not (np.isfinite(state.x) and state.y > 0):
        raise SubproblemError(f"malformed expansion point (x={state.x}, y={state.y})")
    rs = spec.rate_splitting
    p = ConicProgram()
    lay = _Layout(p, s, rs)
    r, common, private = _rate_vars(p, s, rs)
    sum_r = Affine.total(r)
    w = spec.w

    if spec.has_ee_block:
        eta = p.add_var("eta")
        x = p.add_var("x")
        y = p.add_var("y")
        phi = phi_coeffs(state.x, state.y)
        p.add_le(eta - x * phi.slope_x - y * phi.slope_y, name="ee_linearization")
        p.add_rsoc(sum_r, 0.5, [x], name="sqrt_sum_rate")
        if spec.approach == "weighted_sum":
            p.add_rsoc(y - s.p_circuit - sum_r * (s.chi / LN2), 0.5, lay.power_terms(), name="power_accounting")
            p.objective = eta * w + sum_r * ((1.0 - w) / spec.norm(s))
        elif spec.approach == "ee":
            p.add_rsoc(y - s.p_circuit - sum_r * (s.chi / LN2), 0.5, lay.power_terms(), name="power_accounting")
            p.objective = eta
        else:
            rest = [e * np.sqrt(w) for e in lay.power_terms()] if w > 0 else []
            p.add_rsoc(y - s.p_circuit - sum_r * (w * s.chi / LN2), 0.5, rest, name="weighted_power_accounting")
            p.objective = eta
    elif spec.approach == "se":
        p.objective = sum_r
    else:
        p.objective = sum_r * (1.0 / spec.norm(s))

    _add_power_budget(p, lay, s)
    _add_rate_rows(p, lay, spec.bound, s, F_n, common, private, rs)
    p.validate()
    return p


def expansion_point(spec: SubproblemSpec, state: SCAState, s: Scenario, p: ConicProgram) -> np.ndarray:
    """The expansion point written as a vector of ``p``'s variables (feasible by construction)."""

    z = np.zeros(p.n_vars)
    cols = slice(0, None) if spec.rate_splitting else slice(1, None)
    z[p.blocks["F"]] = embed_complex(state.F[:, cols])
    z[p.blocks["r"]] = state.r if spec.rate_splitting else state.r[1:]
    if "eta" in p.blocks:
        z[p.blocks["eta"]] = state.x ** 2 / state.y
        z[p.blocks["x"]] = state.x
        z[p.blocks["y"]] = state.y
    if "gamma" in p.blocks:
        z[p.blocks["gamma"]] = [sinr(state.F, s, Stream.private(k)) for k in range(s.n_users)]
    if "gamma_c" in p.blocks:
        z[p.blocks["gamma_c"]] = [sinr(state.F, s, Stream.common(k)) for k in range(s.n_users)]
    if "t" in p.blocks:
        z[p.blocks["t"]] = transmit_power(state.F)
    return z


def precoder_from_solution(sol: ConicSolution, s: Scenario, rate_splitting: bool) -> np.ndarray:
    cols = s.n_users + 1 if rate_splitting else s.n_users
    F_act = extract_complex(sol.value("F"), (s.nt, cols))
    F = np.zeros((s.nt, s.n_users + 1), dtype=complex)
    F[:, 0 if rate_splitting else 1:] = F_act
    power = transmit_power(F)
    if power > s.p_max:
        F *= np.sqrt(s.p_max / power)
    return F


def extract(sol: ConicSolution, spec: SubproblemSpec, s: Scenario) -> SCAState:
    """Next expansion point from a solved subproblem, re-tightened with exact rates and power."""
    if not sol.ok:
        raise SubproblemError(f"subproblem not solved: {sol.status}")
    return state_from_precoder(spec, precoder_from_solution(sol, s, spec.rate_splitting), s)


def build_parametric(strategy: str, w: float, lam: float, g_ref: float, F_n: np.ndarray, s: Scenario,
                     normalizer: float | None = None) -> ConicProgram:
    """Inner problem of the Dinkelbach baseline at ratio ``lam`` (nats/W).

    Maximizes ``(w / g_ref) * (f - lam * g) + (1 - w) * f / normalizer`` with
    the rate terms replaced by their weighted-MMSE minorants at ``F_n``.
    """
    rs = strategy == "RS"
    p = ConicProgram()
    lay = _Layout(p, s, rs)
    r, common, private = _rate_vars(p, s, rs)
    sum_r = Affine.total(r)
    norm = s.p_circuit if normalizer is None else normalizer
    consumed = sum_r * (s.chi / LN2) + s.p_circuit
    if lam * w > 0:
        # with zero weight, t >= ||F||^2 would leave an unbounded optimal face
        t = p.add_var("t")
        p.add_rsoc(t, 0.5, lay.power_terms(), name="transmit_power")
        consumed = consumed + t
    p.objective = (sum_r - consumed * lam) * (w / g_ref) + sum_r * ((1.0 - w) / norm)
    _add_power_budget(p, lay, s)
    _add_rate_rows(p, lay, "LB1", s, F_n, common, private, rs, coeff_source="wmmse")
    p.validate()
    return p
