import numpy as np
import pytest

from qmimo.errors import InvalidParameterError, InvalidStateError
from qmimo.power import (
    AdcPowerParams,
    adc_power,
    architecture_factor,
    energy_efficiency,
    total_power,
)


def test_three_milliwatt_anchor():
    p = AdcPowerParams()
    assert 2 * 100 * adc_power(2, p) == pytest.approx(3e-3, rel=1e-12)


def test_alpha_for_43_watts():
    alpha = architecture_factor(43.3, 100)
    assert 1.4e4 <= alpha <= 1.5e4
    assert alpha == pytest.approx(43.3 / 3e-3, rel=1e-12)


def test_hand_evaluated_bound():
    p = AdcPowerParams(omega=2.0, c1=1.0, c2=0.5, c3=0.25, c4=0.125, f_s=10.0)
    b = 3
    want = 2.0 * (1.0 * 3 + 0.5 * 9 + 0.25 * 64 + 0.125 * 3 * 64) * 10.0
    assert adc_power(b, p) == pytest.approx(want, rel=1e-15)


def test_linear_in_sampling_rate():
    p = AdcPowerParams()
    for b in range(1, 17):
        assert adc_power(b, p.with_fs(40e6)) == pytest.approx(2 * adc_power(b, p), rel=1e-15)


def test_increasing_and_convex():
    vals = np.array([adc_power(b) for b in range(1, 17)])
    assert np.all(np.diff(vals) > 0)
    assert np.all(np.diff(vals, 2) > 0)


def test_low_b_linear_high_b_exponential():
    p = AdcPowerParams()
    for b, lin_dominates in [(2, True), (4, True), (8, False), (12, False)]:
        lin = p.c1 * b + p.c2 * b * b
        exp = p.c3 * 4.0**b + p.c4 * b * 4.0**b
        assert (lin > exp) == lin_dominates
    exp2 = p.c3 * 16 + p.c4 * 2 * 16
    assert exp2 / (adc_power(2) / (p.omega * p.f_s)) == pytest.approx(0.01, rel=1e-9)


def test_total_power_budget():
    bud = total_power(100, 4, 1e4)
    assert bud.p_adc_total == pytest.approx(200 * adc_power(4))
    assert bud.p_rest == pytest.approx(1e4 * 3e-3)
    assert bud.p_tot == pytest.approx(bud.p_adc_total + bud.p_rest)


def test_efficiency_bandwidth_invariant():
    # C and P both scale with B, so eta does not
    C = 7.3e6
    etas = []
    for B in (1e6, 20e6, 100e6):
        bud = total_power(64, 6, 1e3, AdcPowerParams(f_s=B))
        etas.append(energy_efficiency(C * B / 1e6, bud).eta)
    assert max(etas) / min(etas) - 1 < 1e-12


@pytest.mark.parametrize(
    "kw",
    [{"omega": 0}, {"c1": -1.0}, {"c1": 0, "c2": 0, "c3": 0, "c4": 0}, {"f_s": 0}],
)
def test_invalid_params(kw):
    with pytest.raises(InvalidParameterError):
        AdcPowerParams(**kw)


def test_invalid_inputs():
    with pytest.raises(InvalidParameterError):
        adc_power(0)
    with pytest.raises(InvalidParameterError):
        total_power(0, 4, 1.0)
    with pytest.raises(InvalidParameterError):
        total_power(10, 4, -1.0)


def test_zero_power_is_invalid_state():
    from qmimo.power import PowerBudget

    with pytest.raises(InvalidStateError):
        energy_efficiency(1.0, PowerBudget(0, 0, 0, 0, 0))


def test_high_rate_warning():
    with pytest.warns(RuntimeWarning):
        adc_power(4, AdcPowerParams(f_s=1e9))
