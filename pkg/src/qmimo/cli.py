"""Command-line front end: ``qmimo {calibrate,simulate,sweep,power}``.

Exit codes: 0 success, 1 invalid input, 2 calibration or simulation failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .calibration import calibrate_table, save_calibration
from .config import load_config
from .errors import (
    CalibrationError,
    CalibrationMismatchWarning,
    InvalidParameterError,
    InvalidStateError,
    ParseError,
    SimulationError,
    SingularChannelError,
)
from .power import adc_power, energy_efficiency, total_power
from .report import format_csv, make_manifest, write_figure_files, write_manifest
from .sweep import SweepRecord, point_seed, run_sweep
from .uplink import RECEIVERS, simulate_uplink

EXIT_OK, EXIT_INVALID, EXIT_FAILED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("qmimo")


def _count(text: str) -> int:
    v = float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _receivers(choice: str | None, fallback: str) -> tuple:
    choice = (choice or fallback).lower()
    return RECEIVERS if choice == "both" else (choice,)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _load(args, extra=None):
    overrides = {
        ("run", "seed"): getattr(args, "seed", None),
        ("run", "trials"): getattr(args, "trials", None),
        ("run", "workers"): getattr(args, "workers", None),
        ("system", "mode"): getattr(args, "mode", None),
        ("calibration", "table"): getattr(args, "calibration", None),
    }
    overrides.update(extra or {})
    return load_config(args.config, overrides)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_calibrate(args) -> int:
    cfg = _load(args, {
        ("calibration", "b_min"): args.b_min,
        ("calibration", "b_max"): args.b_max,
        ("calibration", "criterion_db"): args.criterion_db,
        ("calibration", "n_samples"): args.samples,
        ("calibration", "seed"): args.cal_seed,
        ("calibration", "relax_db"): args.relax_db,
    })
    c = cfg["calibration"]
    print(f"{'b':>3} {'mu_star':>10} {'dev_dB':>8} {'rho_xq':>9}")

    def show(e):
        flag = "  (relaxed)" if e.deviation_db > c["criterion_db"] else ""
        print(f"{e.b:>3d} {e.mu_star:>10.4f} {e.deviation_db:>8.2f} {e.rho_xq:>9.4f}{flag}", flush=True)

    calib = calibrate_table(c["b_min"], c["b_max"], c["criterion_db"], c["n_samples"], c["seed"],
                            relax_db=c["relax_db"], progress=show)
    print(f"chord: mu_l(b) = {calib.chord_slope:.6g} * b + {calib.chord_intercept:.6g}")
    save_calibration(calib, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    started = _now()
    calib, calib_path = cfg.calibration()
    up = cfg.uplink(calib)
    receivers = _receivers(args.receiver, up.receiver)
    seed = point_seed(cfg["run"]["seed"], up.M, up.K, up.tau)
    res = simulate_uplink(up, cfg["run"]["trials"], seed, receivers)
    budget = total_power(up.M, up.b, cfg["power"]["alpha"], cfg.power_params(), cfg["power"]["b_ref"])
    records = []
    print(f"M={up.M} K={up.K} T={up.T} tau={up.tau} snr_db={cfg['system']['snr_db']:g} "
          f"b={up.b} mode={up.mode} mu={up.backoff:.4f} trials={cfg['run']['trials']}")
    for r in receivers:
        eff = energy_efficiency(res[r].sumrate, budget)
        print(f"[{r}] C = {eff.sumrate:.6g} bit/s  P_tot = {eff.p_tot:.6g} W  eta = {eff.eta:.6g} bit/J  "
              f"(trials used {res[r].trials_used}, discarded {res[r].trials_discarded})")
        sinqr = res[r].mean_sinqr
        print(f"[{r}] mean SINQR per user: " + " ".join(f"{v:.4g}" for v in sinqr)
              + f"  ({10 * np.log10(np.mean(sinqr)):.2f} dB avg)")
        records.append(SweepRecord(
            r, up.b, up.M, up.K, up.T, up.tau, cfg["system"]["snr_db"], cfg["power"]["alpha"],
            up.K / up.M, up.K / up.T, eff.sumrate, eff.p_tot, eff.eta,
            res[r].trials_used, res[r].trials_discarded,
        ))
    if args.out:
        _write_text(args.out, format_csv(records))
        write_manifest(make_manifest("simulate", cfg.snapshot(), calib_path, cfg["run"]["seed"],
                                     cfg.path, started), args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    name = args.preset or (f"fig{args.figure}" if args.figure else None)
    cfg = _load(args, {("sweep", "preset"): name})
    started = _now()
    calib, calib_path = cfg.calibration()
    name = cfg["sweep"]["preset"] or None
    if not name and not cfg.axes:
        raise InvalidParameterError("sweep needs --preset/--figure or axis.<name> keys in [sweep]")
    spec = cfg.sweep_spec(_receivers(args.receiver, "both"), calib, name)
    n_points = len(list(spec.grid()))
    log.info("sweep: %d grid points x %d receivers", n_points, len(spec.receivers))

    def progress(done, total):
        if args.verbose:
            print(f"\r{done}/{total} units", end="", file=sys.stderr, flush=True)

    records = run_sweep(spec, worker_count=cfg["run"]["workers"], progress=progress)
    if args.verbose:
        print(file=sys.stderr)
    _write_text(args.out, format_csv(records))
    write_manifest(make_manifest("sweep", cfg.snapshot(), calib_path, cfg["run"]["seed"],
                                 cfg.path, started), args.out)
    failed = sum(not r.ok for r in records)
    print(f"wrote {args.out}: {len(records)} rows, {failed} failed")
    if name:
        for p in write_figure_files(name.lower(), records, args.out):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = _load(args, {("system", "B"): args.fs, ("system", "M"): args.M,
                       ("power", "omega"): args.omega})
    params = cfg.power_params()
    M = cfg["system"]["M"]
    if not 1 <= args.b_min <= args.b_max:
        raise InvalidParameterError(f"invalid resolution range [{args.b_min}, {args.b_max}]")
    print(f"# f_s = {params.f_s:g} Hz, omega = {params.omega:g}, M = {M}")
    print("b,P_ADC_W,P_ADC_total_2M_W")
    for b in range(args.b_min, args.b_max + 1):
        p = adc_power(b, params)
        print(f"{b},{p!r},{2 * M * p!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("-v", "--verbose", action="store_true")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--calibration", help="backoff calibration table (default: shipped table)")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--trials", type=_count, help="Monte Carlo trials per point")
    sim.add_argument("--mode", choices=("pqn", "hardware"))
    sim.add_argument("--receiver", choices=("mrc", "zf", "both"))

    p = argparse.ArgumentParser(prog="qmimo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qmimo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", parents=[common], help="tabulate the AGC backoff per resolution")
    c.add_argument("--b-min", type=int)
    c.add_argument("--b-max", type=int)
    c.add_argument("--criterion-db", type=float)
    c.add_argument("--samples", type=_count)
    c.add_argument("--seed", dest="cal_seed", type=int)
    c.add_argument("--relax-db", type=float, help="accept the best backoff if within this many dB")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("simulate", parents=[common, sim], help="one configuration")
    s.add_argument("--out", help="also write a one-row CSV per receiver")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common, sim], help="grid sweep to CSV")
    w.add_argument("--preset", choices=("fig4", "fig5", "fig6"))
    w.add_argument("--figure", choices=("4", "5", "6"), help="same as --preset figN")
    w.add_argument("--workers", type=_count)
    w.add_argument("--out", default="sweep.csv")
    w.set_defaults(func=cmd_sweep)

    pw = sub.add_parser("power", parents=[common], help="ADC power table")
    pw.add_argument("--b-min", type=int, default=1)
    pw.add_argument("--b-max", type=int, default=16)
    pw.add_argument("--fs", type=float, help="sampling rate in Hz (default: bandwidth)")
    pw.add_argument("--omega", type=float)
    pw.add_argument("--M", type=int)
    pw.set_defaults(func=cmd_power)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("always", CalibrationMismatchWarning)
        try:
            return args.func(args)
        except CalibrationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        except (SimulationError, SingularChannelError, InvalidStateError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        except (InvalidParameterError, ParseError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
