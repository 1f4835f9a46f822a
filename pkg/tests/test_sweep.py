import math

import pytest

from qmimo.errors import InvalidParameterError, InvalidStateError
from qmimo.power import AdcPowerParams
from qmimo.sweep import (
    SweepRecord,
    SweepSpec,
    degradation_factor,
    derive_dimensions,
    find_optimal_b,
    find_optimal_training,
    point_seed,
    preset,
    run_sweep,
    uplink_config,
    DEFAULT_FIXED,
)
from qmimo.calibration import default_calibration
from qmimo.uplink import simulate_uplink


def small(axes, **fixed):
    base = {"M": 16, "K_over_M": 0.25, "K_over_T": 0.02}
    base.update(fixed)
    for name, _ in axes:
        base.pop(name, None)
    return SweepSpec(axes=axes, fixed=base, n_trials=30, seed=4)


def rec(b, eta, receiver="zf", tau=10, T=1000):
    return SweepRecord(receiver, b, 100, 10, T, tau, 0.0, 1e4, 0.1, 0.01, C=eta, p_tot=1.0, eta=eta)


@pytest.mark.parametrize(
    "params, dims",
    [
        ({"M": 100, "K_over_M": 0.1, "K_over_T": 0.01, "tau_over_T": None}, (100, 10, 1000, 10)),
        ({"M": 100, "K_over_M": 0.1, "K_over_T": 0.01, "tau_over_T": 0.05}, (100, 10, 1000, 50)),
        ({"M": 100, "K_over_M": 0.1, "K_over_T": 0.01, "tau_over_T": 0.001}, (100, 10, 1000, 10)),
        ({"M": 50, "K_over_M": 0.025, "K_over_T": 0.01, "tau_over_T": None}, (50, 1, 100, 1)),
        ({"M": 10, "K_over_M": 0.05, "K_over_T": 0.5, "tau_over_T": None}, (10, 1, 2, 1)),
    ],
)
def test_derive_dimensions(params, dims):
    assert derive_dimensions(params) == dims


def test_spec_validation():
    with pytest.raises(InvalidParameterError) as info:
        SweepSpec(axes=[("b", [1]), ("bogus", [1]), ("b", [2])], fixed={"b": 3, "zz": 1}, receivers=("x",))
    msg = str(info.value)
    for part in ("unknown axis", "duplicate", "both an axis and fixed", "unknown fixed", "receivers"):
        assert part in msg


def test_grid_order_last_axis_fastest():
    spec = small([("snr_db", [0.0, 10.0]), ("b", [1, 2, 3])])
    pts = [(p["snr_db"], p["b"]) for p in spec.grid()]
    assert pts == [(0.0, 1), (0.0, 2), (0.0, 3), (10.0, 1), (10.0, 2), (10.0, 3)]


def test_records_match_direct_simulation():
    spec = small([("b", [2, 6])], snr_db=5.0, alpha=100.0)
    records = run_sweep(spec)
    assert [(r.b, r.receiver) for r in records] == [(2, "mrc"), (2, "zf"), (6, "mrc"), (6, "zf")]
    params = {**DEFAULT_FIXED, **spec.fixed, "b": 6}
    cfg = uplink_config(params, "pqn", default_calibration())
    direct = simulate_uplink(cfg, 30, point_seed(4, cfg.M, cfg.K, cfg.tau), ("zf",))["zf"]
    r = records[3]
    assert r.C == direct.sumrate
    assert r.eta == r.C / r.p_tot


def test_alpha_points_share_simulation():
    records = run_sweep(small([("alpha", [10.0, 1e3, 1e5]), ("b", [4])]))
    zf = [r for r in records if r.receiver == "zf"]
    assert len({r.C for r in zf}) == 1
    assert zf[0].eta > zf[1].eta > zf[2].eta


def test_bandwidth_invariance_of_eta():
    etas = []
    for B in (1e6, 20e6, 100e6):
        records = run_sweep(small([("b", [3])], B=B))
        etas.append([r.eta for r in records])
    for e in etas[1:]:
        for a, b in zip(etas[0], e):
            assert abs(a - b) / a < 1e-12


def test_permuted_axes_permute_rows():
    a = run_sweep(small([("snr_db", [-5.0, 5.0]), ("b", [2, 5])]))
    b = run_sweep(small([("snr_db", [5.0, -5.0]), ("b", [5, 2])]))
    key = lambda r: (r.receiver, r.snr_db, r.b)
    assert {key(r): r.eta for r in a} == {key(r): r.eta for r in b}


def test_workers_do_not_change_results():
    spec = small([("b", [1, 4]), ("snr_db", [0.0, 10.0])])
    one = run_sweep(spec, worker_count=1)
    two = run_sweep(spec, worker_count=2)
    assert [(r.C, r.eta, r.trials_used) for r in one] == [(r.C, r.eta, r.trials_used) for r in two]


def test_invalid_point_is_recorded_and_run_continues():
    spec = small([("K_over_M", [0.25, 2.0])], b=4)
    records = run_sweep(spec)
    bad = [r for r in records if not r.ok]
    good = [r for r in records if r.ok]
    assert len(bad) == 2 and len(good) == 2
    assert bad[0].status.startswith("invalid") and math.isnan(bad[0].eta)


def test_optimal_b_ties_go_to_smaller_b():
    recs = [rec(3, 1.0), rec(5, 2.0), rec(4, 2.0), rec(6, 0.5)]
    assert find_optimal_b(recs, ("receiver",)) == {("zf",): (4, 2.0)}


def test_optimal_training_ties_go_to_shorter_training():
    recs = [rec(4, 1.0, tau=10), rec(4, 3.0, tau=40), rec(4, 3.0, tau=20), rec(4, 2.0, tau=80)]
    assert find_optimal_training(recs, ("receiver",)) == {("zf",): (0.02, 3.0)}


def test_degradation_factor():
    recs = [rec(1, 1.0), rec(4, 5.5), rec(8, 3.0)]
    assert degradation_factor(recs, ("receiver",)) == {("zf",): 5.5}
    with pytest.raises(InvalidStateError):
        degradation_factor([rec(4, 1.0)], ("receiver",))
    with pytest.raises(InvalidStateError):
        find_optimal_b([], ("receiver",))


def test_presets():
    f4 = preset("fig4", receivers=("zf",))
    assert dict(f4.axes).keys() == {"alpha", "snr_db", "b"}
    assert f4.fixed["M"] == 100 and f4.fixed["K_over_M"] == 0.1 and f4.fixed["K_over_T"] == 0.01
    assert f4.fixed["tau_over_T"] is None and f4.receivers == ("zf",)
    f5 = preset("fig5")
    assert f5.fixed["snr_db"] == 0.0 and f5.fixed["alpha"] == 1e4
    assert dict(f5.axes)["M"] == [50, 100, 200, 400]
    f6 = preset("fig6", receivers=("mrc",))
    assert "tau_over_T" in dict(f6.axes)
    with pytest.raises(InvalidParameterError):
        preset("fig7")


def test_eta_decreases_at_very_high_resolution():
    spec = SweepSpec(axes=[("b", [10, 16])], fixed={"M": 100}, receivers=("zf",), n_trials=50, seed=2)
    r10, r16 = run_sweep(spec)
    assert r16.eta < r10.eta


def test_power_params_follow_bandwidth():
    spec = small([("b", [2])], B=40e6, M=100, K_over_M=0.1, K_over_T=0.01)
    spec.power = AdcPowerParams(f_s=1.0)  # overridden by the point bandwidth
    r = run_sweep(spec)[0]
    assert r.p_tot == pytest.approx((1 + 1e4) * 2 * 100 * 30e-6 * 1.0, rel=1e-9)
