"""CSV emission, run manifests and figure companion tables."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
from pathlib import Path

from . import __version__
from .sweep import SweepRecord, degradation_factor, find_optimal_b, find_optimal_training

CSV_COLUMNS = (
    "receiver", "b", "M", "K", "T", "tau", "snr_db", "alpha",
    "C_bits_per_s", "P_tot_W", "eta_bits_per_J", "trials_used", "trials_discarded", "status",
)


def _num(x) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def record_row(rec: SweepRecord) -> list[str]:
    return [
        rec.receiver, _num(rec.b), _num(rec.M), _num(rec.K), _num(rec.T), _num(rec.tau),
        _num(rec.snr_db), _num(rec.alpha), _num(rec.C), _num(rec.p_tot), _num(rec.eta),
        _num(rec.trials_used), _num(rec.trials_discarded), rec.status,
    ]


def format_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(record_row(rec))
    return buf.getvalue()


def write_csv(records, path) -> None:
    Path(path).write_text(format_csv(records), encoding="utf-8")


def read_csv(path) -> list[dict]:
    """Rows as dicts of strings, exactly as written."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([row[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def records_from_rows(rows: list[dict]) -> list[SweepRecord]:
    out = []
    for row in rows:
        T = int(row["T"])
        K = int(row["K"])
        M = int(row["M"])
        out.append(SweepRecord(
            receiver=row["receiver"], b=int(row["b"]), M=M, K=K, T=T, tau=int(row["tau"]),
            snr_db=float(row["snr_db"]), alpha=float(row["alpha"]),
            K_over_M=K / M if M else math.nan, K_over_T=K / T if T else math.nan,
            C=float(row["C_bits_per_s"]), p_tot=float(row["P_tot_W"]),
            eta=float(row["eta_bits_per_J"]), trials_used=int(row["trials_used"]),
            trials_discarded=int(row["trials_discarded"]), status=row["status"],
        ))
    return out


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(command: str, config: dict, calibration_path, seed: int, config_path=None,
                  started: str | None = None) -> dict:
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    calib = None
    if calibration_path is not None:
        calib = {"path": str(calibration_path), "sha256": file_sha256(calibration_path)}
    return {
        "tool": "qmimo",
        "version": __version__,
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "config": config,
        "calibration": calib,
        "seed": seed,
        "started": started or now,
        "finished": now,
    }


def write_manifest(manifest: dict, results_path) -> Path:
    path = Path(str(results_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path


def _write_table(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if not isinstance(v, str) else v for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return Path(path)


def _stem(out) -> str:
    s = str(out)
    return s[:-4] if s.endswith(".csv") else s


def write_figure_files(figure: str, records, out) -> list[Path]:
    """Derived tables matching the published figure semantics."""
    stem = _stem(out)
    written = []
    if figure == "fig4":
        keys = ("receiver", "alpha", "snr_db")
        opt = find_optimal_b(records, keys)
        written.append(_write_table(f"{stem}_optimal_b.csv", keys + ("b_star", "eta_star"),
                                    [k + v for k, v in sorted(opt.items())]))
        surface = [(r.receiver, r.alpha, r.snr_db, r.b, r.eta) for r in records if r.ok]
        written.append(_write_table(f"{stem}_eta_surface.csv",
                                    ("receiver", "alpha", "snr_db", "b", "eta_bits_per_J"), surface))
    elif figure == "fig5":
        keys = ("receiver", "M", "K")
        opt = find_optimal_b(records, keys)
        deg = degradation_factor(records, keys)
        rows = [k + v + (deg[k],) for k, v in sorted(opt.items())]
        written.append(_write_table(f"{stem}_optimal_b.csv",
                                    keys + ("b_star", "eta_star", "degradation_vs_1bit"), rows))
        surface = [(r.receiver, r.M, r.K, r.b, r.eta) for r in records if r.ok]
        written.append(_write_table(f"{stem}_eta_surface.csv",
                                    ("receiver", "M", "K", "b", "eta_bits_per_J"), surface))
    elif figure == "fig6":
        keys = ("receiver", "b", "snr_db", "K_over_T")
        opt = find_optimal_training(records, keys)
        written.append(_write_table(f"{stem}_tau_star.csv", keys + ("tau_over_T_star", "eta_star"),
                                    [k + v for k, v in sorted(opt.items())]))
    return written
