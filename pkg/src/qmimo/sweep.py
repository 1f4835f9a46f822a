"""Grid sweeps over system parameters and extraction of efficiency optima."""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .calibration import BackoffCalibration, default_calibration
from .errors import InvalidParameterError, InvalidStateError, QmimoError
from .power import DEFAULT_B_REF, AdcPowerParams, energy_efficiency, total_power
from .rng import derive_seed
from .uplink import RECEIVERS, UplinkConfig, simulate_uplink

logger = logging.getLogger(__name__)

AXIS_NAMES = ("b", "M", "K_over_M", "K_over_T", "snr_db", "alpha", "tau_over_T")
EXTRA_FIXED = ("B", "p_n", "pqn_noise", "n_data_symbols", "b_ref")
DEFAULT_FIXED = {
    "b": 8,
    "M": 100,
    "K_over_M": 0.1,
    "K_over_T": 0.01,
    "snr_db": 0.0,
    "alpha": 1e4,
    "tau_over_T": None,
    "B": 20e6,
    "p_n": 1.0,
    "pqn_noise": "uniform",
    "n_data_symbols": 256,
    "b_ref": DEFAULT_B_REF,
}


@dataclass
class SweepSpec:
    axes: list
    fixed: dict = field(default_factory=dict)
    receivers: tuple = RECEIVERS
    n_trials: int = 2000
    seed: int = 1
    mode: str = "pqn"
    power: AdcPowerParams = field(default_factory=AdcPowerParams)
    calibration: BackoffCalibration | None = None

    def __post_init__(self):
        self.axes = [(str(n), list(v)) for n, v in self.axes]
        self.receivers = tuple(r.lower() for r in self.receivers)
        problems = []
        names = [n for n, _ in self.axes]
        for n in names:
            if n not in AXIS_NAMES:
                problems.append(f"unknown axis {n!r}")
        if len(set(names)) != len(names):
            problems.append("duplicate axis names")
        for n in self.fixed:
            if n in names:
                problems.append(f"{n!r} is both an axis and fixed")
            elif n not in AXIS_NAMES and n not in EXTRA_FIXED:
                problems.append(f"unknown fixed parameter {n!r}")
        for n, v in self.axes:
            if not v:
                problems.append(f"axis {n!r} has no values")
        bad = [r for r in self.receivers if r not in RECEIVERS]
        if bad or not self.receivers:
            problems.append(f"receivers must be a non-empty subset of {RECEIVERS}")
        if self.n_trials < 1:
            problems.append("n_trials must be >= 1")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    def grid(self):
        """Parameter dicts in lexicographic axis order (last axis fastest)."""
        base = {**DEFAULT_FIXED, **self.fixed}
        names = [n for n, _ in self.axes]
        for combo in itertools.product(*(v for _, v in self.axes)):
            yield {**base, **dict(zip(names, combo))}


@dataclass
class SweepRecord:
    receiver: str
    b: int
    M: int
    K: int
    T: int
    tau: int
    snr_db: float
    alpha: float
    K_over_M: float
    K_over_T: float
    C: float = math.nan
    p_tot: float = math.nan
    eta: float = math.nan
    trials_used: int = 0
    trials_discarded: int = 0
    wall_time: float = 0.0
    status: str = "ok"

    @property
    def tau_over_T(self) -> float:
        return self.tau / self.T if self.T else math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["tau_over_T"] = self.tau_over_T
        return d


def _nearest(x: float) -> int:
    return int(math.floor(x + 0.5))


def derive_dimensions(params: dict) -> tuple[int, int, int, int]:
    """``(M, K, T, tau)`` from antenna count and loadings.

    ``K = round(K_over_M * M)`` (at least 1), ``T = round(K / K_over_T)``, and
    ``tau = max(K, round(tau_over_T * T))`` or ``K`` when no training length is
    given. Rounding is half-up.
    """
    M = int(params["M"])
    if "K" in params and params["K"] is not None:
        K = int(params["K"])
    else:
        K = max(1, _nearest(params["K_over_M"] * M))
    if params.get("T") is not None:
        T = int(params["T"])
    else:
        if not params["K_over_T"] > 0:
            raise InvalidParameterError(f"K_over_T must be positive, got {params['K_over_T']}")
        T = max(1, _nearest(K / params["K_over_T"]))
    if params.get("tau_over_T") is None:
        tau = K
    else:
        tau = max(K, _nearest(params["tau_over_T"] * T))
    return M, K, T, tau


def point_seed(master: int, M: int, K: int, tau: int) -> int:
    """Seed of a work unit; shared by all points with the same draw shapes.

    Points that differ only in resolution, SNR, coherence length, receiver or
    architecture factor reuse the same random draws (common random numbers),
    and a point's value never depends on which other points are in the grid.
    """
    return derive_seed(master, "uplink", int(M), int(K), int(tau))


def uplink_config(params: dict, mode: str, calibration: BackoffCalibration) -> UplinkConfig:
    M, K, T, tau = derive_dimensions(params)
    b = int(params["b"])
    return UplinkConfig.from_snr_db(
        float(params["snr_db"]),
        p_n=float(params["p_n"]),
        M=M, K=K, T=T, tau=tau, b=b,
        B=float(params["B"]),
        mode=mode,
        mu=calibration.chord(b),
        pqn_noise=params["pqn_noise"],
        n_data_symbols=int(params["n_data_symbols"]),
    )


def _unit_key(cfg: UplinkConfig):
    return (cfg.M, cfg.K, cfg.T, cfg.tau, cfg.b, cfg.p_u, cfg.p_n, cfg.B, cfg.mode,
            cfg.mu, cfg.pqn_noise, cfg.n_data_symbols)


def _run_unit(args):
    cfg, n_trials, seed, receivers = args
    t0 = time.perf_counter()
    try:
        res = simulate_uplink(cfg, n_trials, seed, receivers)
    except QmimoError as exc:
        return {"error": f"failed: {exc}"}, time.perf_counter() - t0
    out = {r: (v.sumrate, v.trials_used, v.trials_discarded) for r, v in res.items()}
    return out, time.perf_counter() - t0


def run_sweep(spec: SweepSpec, worker_count: int = 1, progress=None) -> list[SweepRecord]:
    """One record per grid point and receiver, in grid order.

    Grid points that only differ in ``alpha`` share a single simulation.
    Results are identical for any ``worker_count``.
    """
    calib = spec.calibration or default_calibration()
    points = list(spec.grid())
    if not points:
        raise InvalidParameterError("empty sweep grid")

    resolved = []
    units: dict = {}
    for params in points:
        try:
            cfg = uplink_config(params, spec.mode, calib)
            if not params["alpha"] >= 0:
                raise InvalidParameterError(f"alpha must be >= 0, got {params['alpha']}")
        except (InvalidParameterError, KeyError, TypeError) as exc:
            resolved.append((params, None, f"invalid: {exc}"))
            continue
        key = _unit_key(cfg)
        if key not in units:
            units[key] = (cfg, spec.n_trials, point_seed(spec.seed, cfg.M, cfg.K, cfg.tau), spec.receivers)
        resolved.append((params, cfg, key))

    keys = list(units)
    jobs = [units[k] for k in keys]
    if worker_count > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            results = list(pool.map(_run_unit, jobs))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_run_unit(job))
            if progress is not None:
                progress(i + 1, len(jobs))
    by_key = dict(zip(keys, results))

    records = []
    for params, cfg, key in resolved:
        for r in spec.receivers:
            if cfg is None:
                try:
                    M, K, T, tau = derive_dimensions(params)
                except (InvalidParameterError, KeyError, TypeError, ZeroDivisionError):
                    M, K, T, tau = int(params.get("M", 0)), 0, 0, 0
                records.append(SweepRecord(
                    r, int(params["b"]), M, K, T, tau, float(params["snr_db"]),
                    float(params["alpha"]), float(params["K_over_M"]), float(params["K_over_T"]),
                    status=key,
                ))
                continue
            res, wall = by_key[key]
            rec = SweepRecord(
                r, cfg.b, cfg.M, cfg.K, cfg.T, cfg.tau, float(params["snr_db"]),
                float(params["alpha"]), float(params["K_over_M"]), float(params["K_over_T"]),
                wall_time=wall,
            )
            if "error" in res:
                rec.status = res["error"]
            else:
                C, used, discarded = res[r]
                power = spec.power.with_fs(cfg.B)
                budget = total_power(cfg.M, cfg.b, float(params["alpha"]), power, int(params["b_ref"]))
                eff = energy_efficiency(C, budget)
                rec.C, rec.p_tot, rec.eta = eff.sumrate, eff.p_tot, eff.eta
                rec.trials_used, rec.trials_discarded = used, discarded
            records.append(rec)
    return records


def _groups(records, group_keys):
    groups: dict = {}
    for rec in records:
        if not rec.ok:
            continue
        key = tuple(getattr(rec, k) for k in group_keys)
        groups.setdefault(key, []).append(rec)
    return groups


def find_optimal_b(records, group_keys) -> dict:
    """``{group: (b*, eta*)}``; ties go to the smaller resolution."""
    out = {}
    for key, recs in _groups(records, group_keys).items():
        best = min(recs, key=lambda r: (-r.eta, r.b))
        out[key] = (best.b, best.eta)
    if not out:
        raise InvalidStateError("no successful records to optimise over")
    return out


def find_optimal_training(records, group_keys) -> dict:
    """``{group: (tau/T*, eta*)}`` over the realised training fractions."""
    out = {}
    for key, recs in _groups(records, group_keys).items():
        best = min(recs, key=lambda r: (-r.eta, r.tau_over_T))
        out[key] = (best.tau_over_T, best.eta)
    if not out:
        raise InvalidStateError("no successful records to optimise over")
    return out


def degradation_factor(records, group_keys) -> dict:
    """``{group: eta(b*) / eta(b=1)}``."""
    out = {}
    for key, recs in _groups(records, group_keys).items():
        one = [r for r in recs if r.b == 1]
        if not one:
            raise InvalidStateError(f"group {key} has no b = 1 record")
        best = min(recs, key=lambda r: (-r.eta, r.b))
        out[key] = best.eta / one[0].eta
    if not out:
        raise InvalidStateError("no successful records")
    return out


# Presets mirroring the three published experiments. Grids are our choice;
# the fixed parameters follow the published setup.
B_GRID = list(range(1, 13))


def preset(name: str, receivers=RECEIVERS, n_trials: int = 2000, seed: int = 1) -> SweepSpec:
    name = name.lower()
    if name == "fig4":
        axes = [("alpha", [1e1, 1e2, 1e3, 1e4, 1e5]), ("snr_db", [-10.0, -5.0, 0.0, 5.0, 10.0]), ("b", B_GRID)]
        fixed = {"M": 100, "K_over_M": 0.1, "K_over_T": 0.01, "tau_over_T": None}
    elif name == "fig5":
        axes = [
            ("K_over_M", [0.025, 0.05, 0.1, 0.2]),
            ("M", [50, 100, 200, 400]),
            ("b", B_GRID),
        ]
        fixed = {"snr_db": 0.0, "K_over_T": 0.01, "alpha": 1e4, "tau_over_T": None}
    elif name == "fig6":
        axes = [
            ("snr_db", [-10.0, 0.0, 10.0]),
            ("K_over_T", [0.005, 0.01, 0.02]),
            ("b", B_GRID),
            ("tau_over_T", [0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2]),
        ]
        fixed = {"M": 100, "K_over_M": 0.1, "alpha": 1e4}
    else:
        raise InvalidParameterError(f"unknown preset {name!r} (fig4, fig5, fig6)")
    return SweepSpec(axes=axes, fixed=fixed, receivers=tuple(receivers), n_trials=n_trials, seed=seed)
