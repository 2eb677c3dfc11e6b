import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsma_tradeoff.conic import Affine, ConicProgram, embed_complex, extract_complex, imag_part, real_part, solve


def test_lp_sanity():
    p = ConicProgram()
    x = p.add_var("x")
    p.add_le(x, 3.0)
    p.objective = x
    sol = solve(p)
    assert sol.ok and sol.objective == pytest.approx(3.0, abs=1e-7)
    assert sol.scalar("x") == pytest.approx(3.0, abs=1e-7)


def test_soc_pythagoras():
    p = ConicProgram()
    t, x, y = p.add_var("t"), p.add_var("x"), p.add_var("y")
    p.add_eq(x, 3.0)
    p.add_eq(y, 4.0)
    p.add_soc(t, [x, y])
    p.objective = -t
    sol = solve(p)
    assert sol.ok and sol.scalar("t") == pytest.approx(5.0, abs=1e-6)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 10.0])
def test_exp_cone_encodes_log(gamma):
    p = ConicProgram()
    r, g = p.add_var("r"), p.add_var("gamma")
    p.add_exp(r, 1.0, g + 1.0)
    p.add_le(g, gamma)
    p.objective = r
    sol = solve(p)
    assert sol.ok and sol.objective == pytest.approx(math.log1p(gamma), abs=1e-6)


@pytest.mark.parametrize("rates", [[1.0], [0.5, 2.0], [3.0, 0.25, 1.0]])
def test_rotated_cone_reaches_sqrt_boundary(rates):
    p = ConicProgram()
    idx = p.add_vars("r", len(rates))
    x = p.add_var("x")
    r = [Affine.var(i) for i in idx]
    for ri, v in zip(r, rates):
        p.add_eq(ri, v)
    p.add_rsoc(Affine.total(r), 0.5, [x])
    p.objective = x
    sol = solve(p)
    assert sol.ok and sol.scalar("x") == pytest.approx(math.sqrt(sum(rates)), abs=1e-6)


def test_infeasible_and_unbounded_are_reported():
    p = ConicProgram()
    x = p.add_var("x")
    p.add_le(x, -1.0)
    p.add_le(-x, -1.0)
    p.objective = x
    assert solve(p).status == "infeasible"

    q = ConicProgram()
    y = q.add_var("y")
    q.add_le(-y, 0.0)
    q.objective = y
    assert solve(q).status == "unbounded"


def test_solve_is_deterministic():
    p = ConicProgram()
    idx = p.add_vars("f", 4)
    f = [Affine.var(i) for i in idx]
    r = p.add_var("r")
    p.add_soc(1.0, f)
    p.add_exp(r, 1.0, f[0] * 3.0 + f[1] + 1.0)
    p.objective = r - f[2] * 0.1 + f[3] * 0.2
    a, b = solve(p), solve(p)
    assert a.ok and abs(a.objective - b.objective) <= 1e-12
    np.testing.assert_array_equal(a.z, b.z)


def test_optimal_status_implies_small_residual():
    p = ConicProgram()
    idx = p.add_vars("f", 3)
    f = [Affine.var(i) for i in idx]
    p.add_soc(2.0, f)
    p.objective = Affine.total(f)
    sol = solve(p, tol=1e-8)
    assert sol.ok and sol.primal_residual <= 1e-8 and p.violation(sol.z, relative=True) <= 1e-8
    assert sol.objective == pytest.approx(2.0 * math.sqrt(3.0), abs=1e-7)


def test_vanishing_coefficients_do_not_break_the_solve():
    # a cone whose tail coefficients are numerically zero behaves like a sign constraint
    p = ConicProgram()
    x, y = p.add_var("x"), p.add_var("y")
    p.add_rsoc(1.0 - x, 0.5, [y * 1e-60])
    p.add_soc(1.0, [y])
    p.objective = x + y
    sol = solve(p)
    assert sol.ok and sol.objective == pytest.approx(2.0, abs=1e-6)


def test_embedding_examples():
    np.testing.assert_array_equal(embed_complex(np.array([1 + 2j])), [1.0, 2.0])
    z = embed_complex(np.array([1 + 1j]))
    assert real_part(np.array([1 - 1j]), np.array([0, 1])).value(z) == pytest.approx(0.0)
    assert imag_part(np.array([1 - 1j]), np.array([0, 1])).value(z) == pytest.approx(2.0)
    f = np.array([1 + 2j])
    assert float(embed_complex(f) @ embed_complex(f)) == 5.0


@settings(max_examples=50)
@given(seed=st.integers(0, 2 ** 31), rows=st.integers(1, 6), cols=st.integers(1, 5))
def test_embedding_round_trip_and_inner_products(seed, rows, cols):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    z = embed_complex(M)
    np.testing.assert_array_equal(extract_complex(z, M.shape), M)
    c = rng.standard_normal(rows) + 1j * rng.standard_normal(rows)
    idx = np.arange(2 * rows)
    col = embed_complex(M[:, 0])
    assert real_part(c, idx).value(col) == pytest.approx(np.real(np.vdot(c, M[:, 0])), abs=1e-12)
    assert imag_part(c, idx).value(col) == pytest.approx(np.imag(np.vdot(c, M[:, 0])), abs=1e-12)
    assert float(z @ z) == pytest.approx(np.sum(np.abs(M) ** 2), rel=1e-12)


def test_validate_catches_bad_programs():
    p = ConicProgram()
    p.add_vars("x", 2)
    p.objective = Affine.var(0)
    with pytest.raises(ValueError, match="not referenced"):
        p.validate()
    p.add_le(Affine.var(5), 1.0)
    with pytest.raises(ValueError, match="out of range"):
        p.validate()
    with pytest.raises(ValueError):
        p.add_vars("x", 1)


def test_dump_lists_everything():
    p = ConicProgram()
    x = p.add_var("x")
    p.add_le(x, 1.0, name="cap")
    p.add_exp(x, 1.0, 2.0, name="log")
    p.objective = x
    text = p.dump()
    assert "cap" in text and "exp log" in text and "maximize" in text
    assert p.count("exp") == 1 and p.var_names() == ["x"]
