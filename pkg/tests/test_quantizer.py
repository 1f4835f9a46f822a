import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from qmimo.errors import InvalidParameterError
from qmimo.quantizer import (
    exact_deviation_db,
    exact_distortion_moments,
    make_quantizer,
    measure_distortion_stats,
    pqn_variance,
    quantize,
)


def brute_force(b, X_ol, x):
    """Scan the cells of the mapping rule one by one."""
    n = 2**b
    d = 2 * X_ol / n
    levels = [i * d - (n + 1) * d / 2 for i in range(1, n + 1)]
    thr = [(i - n // 2) * d for i in range(1, n)]
    if x <= thr[0]:
        return levels[0]
    for i in range(1, n - 1):
        if thr[i - 1] < x <= thr[i]:
            return levels[i]
    return levels[-1]


@pytest.mark.parametrize(
    "b, X_ol, delta, levels, thresholds",
    [
        (1, 1.0, 1.0, [-0.5, 0.5], [0.0]),
        (2, 1.0, 0.5, [-0.75, -0.25, 0.25, 0.75], [-0.5, 0.0, 0.5]),
    ],
)
def test_spec_geometry(b, X_ol, delta, levels, thresholds):
    q = make_quantizer(b, X_ol)
    assert q.N_q == 2**b
    assert q.delta == delta
    np.testing.assert_allclose(q.levels, levels, atol=0)
    np.testing.assert_allclose(q.thresholds, thresholds, atol=0)


def test_three_bit_wide_range():
    q = make_quantizer(3, 2.0)
    assert q.delta == 0.5
    assert len(q.levels) == 8
    assert q.levels[0] == -1.75 and q.levels[-1] == 1.75


@pytest.mark.parametrize("b, X_ol", [(0, 1.0), (-1, 1.0), (2, 0.0), (2, -1.0), (1.5, 1.0)])
def test_invalid_spec(b, X_ol):
    with pytest.raises(InvalidParameterError):
        make_quantizer(b, X_ol)


@pytest.mark.parametrize("b, x, y", [(2, 0.26, 0.25), (2, 2.0, 0.75), (1, -0.3, -0.5), (2, -7.0, -0.75)])
def test_quantize_examples(b, x, y):
    assert quantize(make_quantizer(b, 1.0), x) == y


def test_thresholds_belong_to_lower_cell():
    q = make_quantizer(2, 1.0)
    assert quantize(q, -0.5) == -0.75
    assert quantize(q, 0.0) == -0.25
    assert quantize(q, 0.5) == 0.25
    assert quantize(q, np.nextafter(0.0, 1.0)) == 0.25


def test_array_and_scalar_agree():
    q = make_quantizer(3, 1.0)
    x = np.linspace(-1.5, 1.5, 101)
    arr = quantize(q, x)
    assert arr.shape == x.shape
    assert all(arr[i] == quantize(q, float(x[i])) for i in range(len(x)))


@pytest.mark.parametrize("b", [1, 2, 3, 4])
def test_matches_brute_force_scan(b):
    rng = np.random.default_rng(b)
    X_ol = 1.3
    q = make_quantizer(b, X_ol)
    x = np.concatenate([rng.uniform(-2, 2, 3000), q.thresholds, [-X_ol, X_ol]])
    got = quantize(q, x)
    want = np.array([brute_force(b, X_ol, v) for v in x])
    np.testing.assert_array_equal(got, want)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 16), st.floats(0.01, 100), st.floats(-1e3, 1e3, allow_nan=False))
def test_output_is_a_level(b, X_ol, x):
    q = make_quantizer(b, X_ol)
    y = quantize(q, x)
    k = (y / q.delta) + (q.N_q + 1) / 2
    assert abs(k - round(k)) < 1e-6 and 1 <= round(k) <= q.N_q
    if abs(x) <= X_ol:
        assert abs(y - x) <= q.delta / 2 + 4 * np.spacing(X_ol)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.floats(-5, 5), st.floats(-5, 5))
def test_monotone_and_odd(b, x1, x2):
    q = make_quantizer(b, 1.0)
    lo, hi = min(x1, x2), max(x1, x2)
    assert quantize(q, lo) <= quantize(q, hi)
    # odd symmetry holds away from thresholds
    if not np.any(np.isclose(q.thresholds, x1, atol=1e-12)):
        assert quantize(q, -x1) == -quantize(q, x1)


def test_pqn_variance():
    assert pqn_variance(1, 1.0) == pytest.approx(1 / 12, rel=1e-15)
    assert pqn_variance(2, 1.0) == pytest.approx(1 / 48, rel=1e-15)
    for b in range(1, 20):
        assert pqn_variance(b, 2.0) / pqn_variance(b + 1, 2.0) == 4.0


def test_measure_is_deterministic():
    a = measure_distortion_stats(6, 12.0, 10**5, 3)
    b = measure_distortion_stats(6, 12.0, 10**5, 3)
    assert a == b


def test_measure_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        measure_distortion_stats(4, 0.0, 10**5, 1)
    with pytest.raises(InvalidParameterError):
        measure_distortion_stats(4, 4.0, 10**4, 1)


def test_heavy_clipping_far_above_criterion():
    st_ = measure_distortion_stats(4, 0.25, 10**6, 1)
    assert st_.deviation_db > 0


def _quad_moments(b, mu):
    """E{q^2}, E{xq} by adaptive quadrature over each cell (independent oracle)."""
    n = 2**b
    d = 2.0 / n
    s = 1 / math.sqrt(mu)
    pdf = stats.norm(scale=s).pdf
    edges = [-math.inf] + [(-n / 2 + i) * d for i in range(1, n)] + [math.inf]
    eqq = exq = 0.0
    for i in range(n):
        lv = (i + 1) * d - (n + 1) * d / 2
        lo, hi = edges[i], edges[i + 1]
        eqq += integrate.quad(lambda x: (lv - x) ** 2 * pdf(x), lo, hi, epsabs=1e-16, epsrel=1e-12)[0]
        exq += integrate.quad(lambda x: x * (lv - x) * pdf(x), lo, hi, epsabs=1e-16, epsrel=1e-12)[0]
    return eqq, exq


@pytest.mark.parametrize("b, mu", [(1, 6.35), (2, 3.0), (3, 10.0), (5, 20.0), (6, 1.0)])
def test_exact_moments_match_quadrature(b, mu):
    eqq, exq = exact_distortion_moments(b, mu)
    qq, xq = _quad_moments(b, mu)
    assert eqq == pytest.approx(qq, rel=1e-7)
    assert exq == pytest.approx(xq, rel=1e-6, abs=1e-12)


def test_exact_moments_agree_with_monte_carlo():
    for b, mu in [(3, 8.0), (8, 20.0)]:
        mc = measure_distortion_stats(b, mu, 10**6, 11)
        eqq, _ = exact_distortion_moments(b, mu)
        assert mc.measured_var == pytest.approx(eqq, rel=0.01)


def test_large_b_uses_stable_tails():
    # granular noise dominates at ample backoff, overload dominates when tight
    assert exact_deviation_db(12, 40.0) < -40
    assert exact_deviation_db(12, 16.0) > 0
    # overload tail ~ 2*sigma^2*phi(t)/t^3 at t = 8 against 2**-50/3: about -27 dB
    assert -30 < exact_deviation_db(25, 64.0) < -25
    assert exact_deviation_db(20, 64.0) < -50
