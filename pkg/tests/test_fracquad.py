import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from fracwest.fracquad import TimeGrid, apply_history, build_weights, implicit_weight, integrate

betas = st.floats(0.05, 1.0)
steps = st.integers(1, 60)


def _abel_quad(f, t, beta):
    """Adaptive quadrature of (I^beta f)(t) with the algebraic endpoint weight."""
    val, _ = quad(f, 0.0, t, weight="alg", wvar=(0.0, beta - 1.0), epsabs=1e-15, epsrel=1e-13,
                  limit=200)
    return val / gamma(beta)


def test_beta_one_is_trapezoid():
    g = TimeGrid(8, 1.0)
    w = build_weights(g, 1.0)
    dt = g.dt
    for n in (1, 2, 5, 8):
        expect = np.full(n + 1, dt)
        expect[0] = expect[-1] = dt / 2
        np.testing.assert_allclose(w.row(n), expect, rtol=1e-14)
        assert implicit_weight(w, n) == pytest.approx(dt / 2)


def test_exact_for_constant_and_linear():
    g = TimeGrid(100, 1.0)
    w = build_weights(g, 0.5)
    one = integrate(w, np.ones(g.n_steps + 1))
    lin = integrate(w, g.times)
    assert abs(one[-1] - 2 / math.sqrt(math.pi)) < 1e-12
    assert abs(lin[-1] - 4 / (3 * math.sqrt(math.pi))) < 1e-12


def test_empty_history_and_zero_samples():
    g = TimeGrid(10, 1.0)
    w = build_weights(g, 0.5)
    assert apply_history(w, np.ones(11), 0) == 0.0
    assert implicit_weight(w, 0) == 0.0
    assert np.all(integrate(w, np.zeros(11)) == 0.0)
    assert np.all(apply_history(w, np.zeros((11, 3)), 7) == 0.0)


def test_t_squared_against_adaptive_quadrature():
    g = TimeGrid(1000, 1.0)
    w = build_weights(g, 0.5)
    approx = integrate(w, g.times ** 2)[-1]
    ref = _abel_quad(lambda s: s ** 2, 1.0, 0.5)
    assert ref == pytest.approx(gamma(3) / gamma(3.5))
    assert abs(approx - ref) / ref < 1e-4


def test_first_cell_weight_against_adaptive_quadrature():
    g = TimeGrid(50, 0.5)
    dt = g.dt
    w = build_weights(g, 0.5)
    ref = _abel_quad(lambda s: s / dt, dt, 0.5)
    assert abs(implicit_weight(w, 1) - ref) < 1e-12


def test_convergence_order_on_t_squared():
    errs = []
    ref = gamma(3) / gamma(3.5)
    for n in (50, 100, 200, 400):
        g = TimeGrid(n, 1.0)
        errs.append(abs(integrate(build_weights(g, 0.5), g.times ** 2)[-1] - ref))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


@given(betas, steps)
def test_last_weight_translation_invariant(beta, n_steps):
    w = build_weights(TimeGrid(n_steps, 1.0), beta)
    last = {float(w.row(n)[-1]) for n in range(1, n_steps + 1)}
    assert len(last) == 1


@given(betas, steps)
def test_rule_reproduces_linears(beta, n_steps):
    g = TimeGrid(n_steps, 1.0)
    w = build_weights(g, beta)
    t = g.times
    exact_1 = t ** beta / gamma(beta + 1)
    exact_t = t ** (beta + 1) / gamma(beta + 2)
    np.testing.assert_allclose(integrate(w, np.ones_like(t)), exact_1, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(integrate(w, t), exact_t, rtol=1e-10, atol=1e-14)


@given(betas, steps, st.integers(0, 2**32 - 1))
def test_history_is_linear_and_causal(beta, n_steps, seed):
    g = TimeGrid(n_steps, 1.0)
    w = build_weights(g, beta)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, n_steps + 1))
    n = int(rng.integers(1, n_steps + 1))
    lhs = apply_history(w, 2.0 * a - 3.0 * b, n)
    assert lhs == pytest.approx(2.0 * apply_history(w, a, n) - 3.0 * apply_history(w, b, n),
                                abs=1e-12)
    # samples at or after step n are never read
    c = a.copy()
    c[n:] = 1e6
    assert apply_history(w, c, n) == apply_history(w, a, n)


@given(betas, steps)
def test_weights_positive(beta, n_steps):
    w = build_weights(TimeGrid(n_steps, 1.0), beta)
    for n in range(1, n_steps + 1):
        assert np.all(w.row(n) > 0)


def test_vector_samples_match_columns():
    g = TimeGrid(30, 1.0)
    w = build_weights(g, 0.3)
    s = np.random.default_rng(1).standard_normal((31, 4))
    full = apply_history(w, s, 17)
    for j in range(4):
        assert full[j] == pytest.approx(apply_history(w, s[:, j], 17))


def test_bad_inputs():
    g = TimeGrid(10, 1.0)
    with pytest.raises(ValueError):
        build_weights(g, 0.0)
    with pytest.raises(ValueError):
        build_weights(g, 1.5)
    w = build_weights(g, 0.5)
    with pytest.raises(IndexError):
        apply_history(w, np.ones(11), 11)
    with pytest.raises(IndexError):
        apply_history(w, np.ones(3), 5)
