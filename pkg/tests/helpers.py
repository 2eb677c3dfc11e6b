"""Shared builders for the test-suite."""
import math

import numpy as np
from hypothesis import strategies as st

from rsma_tradeoff.channel import (DEFAULT_PC_W, GeometricChannelConfig, Scenario, build_scenario,
                                   geometric_channels, random_cscg_channels)

PC = DEFAULT_PC_W


def scalar_scenario(p_max=10.0, chi=0.1, sigma2=1.0, p_circuit=PC):
    return Scenario(H=np.ones((1, 1)), sigma2=sigma2, p_max=p_max, p_circuit=p_circuit, chi=chi)


def two_user_scenario(snr_db=20.0, theta2=math.pi / 9, chi=0.1):
    H = geometric_channels(GeometricChannelConfig(4, [0.0, theta2]))
    return build_scenario(H, snr_db, chi=chi)


def three_user_scenario(snr_db=20.0):
    H = geometric_channels(GeometricChannelConfig(4, [0.0, math.pi / 9, 2 * math.pi / 9]))
    return build_scenario(H, snr_db)


def random_scenario(seed, nt=4, n_users=2, snr_db=20.0, chi=0.1):
    return build_scenario(random_cscg_channels(nt, n_users, seed), snr_db, chi=chi)


def random_precoder(rng, s, scale=1.0):
    shape = (s.nt, s.n_users + 1)
    F = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return scale * F * math.sqrt(s.p_max / np.sum(np.abs(F) ** 2))


seeds = st.integers(0, 2 ** 32 - 1)

# criterion number -> (passed, one-line detail); printed in the terminal summary
ACCEPTANCE_LOG: dict[int, tuple[bool, str]] = {}


def report(n: int, ok: bool, detail: str):
    ACCEPTANCE_LOG[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {n}: {detail}"
