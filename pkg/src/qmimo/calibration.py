"""AGC input-backoff calibration against the PQN deviation criterion.

For each resolution ``b`` the calibrator finds the smallest backoff ``mu`` at
which the measured quantization-noise variance of a Gaussian input deviates
from the PQN variance by at most ``criterion_db``. The per-``b`` optima are
then summarised by a chord through the two endpoint resolutions, which is what
the AGC uses at run time.
"""

from __future__ import annotations

import datetime as _dt
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CalibrationError,
    CalibrationMismatchWarning,
    InvalidParameterError,
    InvalidStateError,
    ParseError,
)
from .quantizer import (
    _standard_normals,
    distortion_stats_from_normals,
    exact_deviation_db,
    measure_distortion_stats,
)

logger = logging.getLogger(__name__)

DEFAULT_CRITERION_DB = -13.0
DEFAULT_SEARCH = {"mu_min": 0.5, "mu_max": 64.0, "grid_points": 64}
BISECTION_REL_WIDTH = 1e-3

HEADER_KEYS = (
    "criterion_db",
    "n_samples",
    "seed",
    "b_min",
    "b_max",
    "chord_slope",
    "chord_intercept",
    "relax_db",
    "created",
)


@dataclass(frozen=True)
class CalibrationEntry:
    b: int
    mu_star: float
    deviation_db: float
    rho_xq: float


@dataclass
class BackoffCalibration:
    entries: dict[int, CalibrationEntry]
    chord_slope: float
    chord_intercept: float
    b_range: tuple[int, int]
    criterion_db: float = DEFAULT_CRITERION_DB
    n_samples: int = 10**7
    seed: int = 0
    relax_db: float = 0.0
    created: str = field(default="", compare=False)

    def mu_star(self, b: int) -> float:
        return self.entries[b].mu_star

    def chord(self, b: float) -> float:
        """Linearised backoff ``mu_l(b)`` used by the AGC."""
        return self.chord_slope * b + self.chord_intercept

    def relaxed(self) -> list[int]:
        """Resolutions whose tabulated backoff misses the criterion."""
        return [b for b, e in sorted(self.entries.items()) if e.deviation_db > self.criterion_db]


def _search_grid(search: dict) -> np.ndarray:
    mu_min = float(search["mu_min"])
    mu_max = float(search["mu_max"])
    points = int(search["grid_points"])
    if not (0 < mu_min < mu_max):
        raise InvalidParameterError(f"need 0 < mu_min < mu_max, got {mu_min}, {mu_max}")
    if points < 16:
        raise InvalidParameterError(f"need at least 16 grid points, got {points}")
    return np.geomspace(mu_min, mu_max, points)


def _search(b, criterion_db, search, n_samples, seed, relax_db):
    if n_samples < 10**5:
        raise InvalidParameterError(f"need at least 1e5 samples, got {n_samples}")
    grid = _search_grid(search)
    z = _standard_normals(int(n_samples), int(seed))

    def deviation(mu, need_mc=False):
        # Monte Carlo alone misses overload events rarer than ~1/n_samples, so
        # a backoff must pass both the sampled and the exact Gaussian check.
        dev = exact_deviation_db(b, mu)
        if dev > criterion_db and not need_mc:
            return dev
        return max(dev, distortion_stats_from_normals(b, mu, z).deviation_db)

    for i, mu in enumerate(grid):
        if deviation(mu) <= criterion_db:
            if i == 0:
                return float(mu)
            lo, hi = grid[i - 1], mu
            while (hi - lo) / hi > BISECTION_REL_WIDTH:
                mid = math.sqrt(lo * hi)
                if deviation(mid) <= criterion_db:
                    hi = mid
                else:
                    lo = mid
            return float(hi)
    devs = [deviation(mu, need_mc=True) for mu in grid]
    best = int(np.argmin(devs))
    if devs[best] <= criterion_db + relax_db:
        logger.warning(
            "b=%d: criterion %.1f dB unreachable, using minimum-deviation backoff %.4g (%.2f dB)",
            b, criterion_db, grid[best], devs[best],
        )
        return float(grid[best])
    raise CalibrationError(b, float(devs[best]), criterion_db)


def calibrate_mu(
    b: int,
    criterion_db: float = DEFAULT_CRITERION_DB,
    search: dict | None = None,
    n_samples: int = 10**7,
    seed: int = 0,
    relax_db: float = 0.0,
) -> float:
    """Smallest backoff on a log grid meeting ``criterion_db``, bisection-refined.

    A backoff qualifies when both the Monte Carlo deviation (``n_samples``
    draws from ``seed``) and the exact Gaussian deviation meet the criterion.
    The grid is scanned upwards; the first satisfying point and its failing
    predecessor are bisected (geometrically) until their relative gap is below
    1e-3 and the satisfying end is returned. All evaluations share the same
    standard normal draws, so the result is deterministic for a given seed.

    When no grid point qualifies, ``CalibrationError`` is raised unless the best
    achievable deviation is within ``relax_db`` of the criterion, in which case
    the minimum-deviation grid point is returned instead.
    """
    return _search(int(b), float(criterion_db), search or DEFAULT_SEARCH, n_samples, seed, relax_db)


def fit_chord(calib: BackoffCalibration) -> tuple[float, float]:
    """Line through the two endpoint samples ``mu*(b_min)`` and ``mu*(b_max)``."""
    b_min, b_max = calib.b_range
    missing = [b for b in (b_min, b_max) if b not in calib.entries]
    if missing:
        raise InvalidStateError(f"calibration lacks endpoint resolution(s) {missing}")
    lo, hi = calib.entries[b_min].mu_star, calib.entries[b_max].mu_star
    if b_max == b_min:
        return 0.0, lo
    slope = (hi - lo) / (b_max - b_min)
    return slope, lo - slope * b_min


def calibrate_table(
    b_min: int = 1,
    b_max: int = 25,
    criterion_db: float = DEFAULT_CRITERION_DB,
    n_samples: int = 10**7,
    seed: int = 0,
    search: dict | None = None,
    relax_db: float = 0.0,
    progress=None,
) -> BackoffCalibration:
    """Calibrate every resolution in ``[b_min, b_max]`` and fit the chord."""
    if not 1 <= b_min <= b_max:
        raise InvalidParameterError(f"invalid resolution range [{b_min}, {b_max}]")
    entries = {}
    for b in range(b_min, b_max + 1):
        mu = calibrate_mu(b, criterion_db, search, n_samples, seed, relax_db)
        st = measure_distortion_stats(b, mu, n_samples, seed)
        entries[b] = CalibrationEntry(b, mu, st.deviation_db, st.rho_xq)
        if progress is not None:
            progress(entries[b])
    calib = BackoffCalibration(
        entries=entries,
        chord_slope=0.0,
        chord_intercept=0.0,
        b_range=(b_min, b_max),
        criterion_db=criterion_db,
        n_samples=n_samples,
        seed=seed,
        relax_db=relax_db,
        created=_dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat(),
    )
    calib.chord_slope, calib.chord_intercept = fit_chord(calib)
    if min(calib.chord(b_min), calib.chord(b_max)) <= 0:
        raise InvalidStateError("chord is not positive over the calibrated range")
    return calib


# Table file: "key = value" header lines, then a "# b mu_star deviation_db rho_xq"
# marker and one whitespace-separated row per resolution. Floats use repr() so a
# save/load round trip is exact.


def format_calibration(calib: BackoffCalibration) -> str:
    head = {
        "criterion_db": repr(float(calib.criterion_db)),
        "n_samples": str(int(calib.n_samples)),
        "seed": str(int(calib.seed)),
        "b_min": str(calib.b_range[0]),
        "b_max": str(calib.b_range[1]),
        "chord_slope": repr(float(calib.chord_slope)),
        "chord_intercept": repr(float(calib.chord_intercept)),
        "relax_db": repr(float(calib.relax_db)),
        "created": calib.created or "-",
    }
    lines = ["# qmimo backoff calibration table"]
    lines += [f"{k} = {head[k]}" for k in HEADER_KEYS]
    lines.append("# b mu_star deviation_db rho_xq")
    for b in sorted(calib.entries):
        e = calib.entries[b]
        lines.append(f"{b} {e.mu_star!r} {e.deviation_db!r} {e.rho_xq!r}")
    lines.append("# end")
    return "\n".join(lines) + "\n"


def save_calibration(calib: BackoffCalibration, path) -> None:
    Path(path).write_text(format_calibration(calib), encoding="utf-8")


def parse_calibration(text: str) -> BackoffCalibration:
    head: dict[str, str] = {}
    entries: dict[int, CalibrationEntry] = {}
    in_rows = False
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            marker = line[1:].split()
            if marker[:1] == ["b"]:
                in_rows = True
            elif marker == ["end"]:
                ended = True
            continue
        if ended:
            raise ParseError("content after end marker", line=lineno)
        if not in_rows:
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in HEADER_KEYS:
                raise ParseError(f"unexpected header line {raw!r}", line=lineno, field=key or None)
            head[key] = value.strip()
            continue
        cols = line.split()
        if len(cols) != 4:
            raise ParseError(f"expected 4 columns, found {len(cols)}", line=lineno)
        names = ("b", "mu_star", "deviation_db", "rho_xq")
        try:
            b = int(cols[0])
        except ValueError:
            raise ParseError(f"bad integer {cols[0]!r}", line=lineno, field="b") from None
        vals = []
        for name, col in zip(names[1:], cols[1:]):
            try:
                vals.append(float(col))
            except ValueError:
                raise ParseError(f"bad number {col!r}", line=lineno, field=name) from None
        entries[b] = CalibrationEntry(b, *vals)
    if not ended:
        raise ParseError("file is truncated (missing end marker)")
    missing = [k for k in HEADER_KEYS if k not in head]
    if missing:
        raise ParseError(f"missing header field(s) {', '.join(missing)}", field=missing[0])

    def num(key, conv):
        try:
            return conv(head[key])
        except ValueError:
            raise ParseError(f"bad value {head[key]!r}", field=key) from None

    b_range = (num("b_min", int), num("b_max", int))
    absent = [b for b in range(b_range[0], b_range[1] + 1) if b not in entries]
    if absent:
        raise ParseError(f"no rows for resolution(s) {absent}", field="b")
    return BackoffCalibration(
        entries=entries,
        chord_slope=num("chord_slope", float),
        chord_intercept=num("chord_intercept", float),
        b_range=b_range,
        criterion_db=num("criterion_db", float),
        n_samples=num("n_samples", int),
        seed=num("seed", int),
        relax_db=num("relax_db", float),
        created="" if head["created"] == "-" else head["created"],
    )


def load_calibration(path, criterion_db: float | None = None) -> BackoffCalibration:
    """Read a calibration table; warn if it was made for another criterion."""
    calib = parse_calibration(Path(path).read_text(encoding="utf-8"))
    if criterion_db is not None and calib.criterion_db != criterion_db:
        warnings.warn(
            f"calibration table {path} was made for {calib.criterion_db} dB, "
            f"{criterion_db} dB requested",
            CalibrationMismatchWarning,
            stacklevel=2,
        )
    return calib


def default_calibration_path() -> Path:
    return Path(__file__).with_name("data") / "default_calibration.txt"


def default_calibration() -> BackoffCalibration:
    """Table shipped with the package (b = 1..25, -13 dB, 1e7 samples, seed 7)."""
    return load_calibration(default_calibration_path())
