"""INI-style run configuration.

Sections and keys (all optional, defaults follow the single-cell setup used
for the published sweeps)::

    [system]       M K T tau snr_db b receiver B p_n mode pqn_noise
                   n_data_symbols beta
    [power]        omega c1 c2 c3 c4 alpha b_ref
    [calibration]  table criterion_db b_min b_max n_samples seed relax_db
    [run]          seed trials workers
    [sweep]        preset K_over_M K_over_T tau_over_T axis.<name>

Sweep axes are given as ``axis.b = 1:12`` (inclusive integer range,
optionally ``start:stop:step``) or as comma lists ``axis.alpha = 1e2, 1e4``.
Validation reports every problem at once.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import DEFAULT_CRITERION_DB, BackoffCalibration, default_calibration, load_calibration
from .errors import InvalidParameterError
from .power import DEFAULT_B_REF, DEFAULT_C1, DEFAULT_C2, DEFAULT_C3, DEFAULT_C4, DEFAULT_OMEGA, AdcPowerParams
from .sweep import AXIS_NAMES, SweepSpec, preset
from .uplink import UplinkConfig


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _str(s: str) -> str:
    return s.strip()


SCHEMA = {
    "system": {
        "M": (_int, 100),
        "K": (_int, 10),
        "T": (_int, 1000),
        "tau": (_int, 10),
        "snr_db": (float, 0.0),
        "b": (_int, 8),
        "receiver": (_str, "zf"),
        "B": (float, 20e6),
        "p_n": (float, 1.0),
        "mode": (_str, "pqn"),
        "pqn_noise": (_str, "uniform"),
        "n_data_symbols": (_int, 256),
        "beta": (_floats, ()),
    },
    "power": {
        "omega": (float, DEFAULT_OMEGA),
        "c1": (float, DEFAULT_C1),
        "c2": (float, DEFAULT_C2),
        "c3": (float, DEFAULT_C3),
        "c4": (float, DEFAULT_C4),
        "alpha": (float, 1e4),
        "b_ref": (_int, DEFAULT_B_REF),
    },
    "calibration": {
        "table": (_str, ""),
        "criterion_db": (float, DEFAULT_CRITERION_DB),
        "b_min": (_int, 1),
        "b_max": (_int, 25),
        "n_samples": (_int, 10**7),
        "seed": (_int, 7),
        "relax_db": (float, 3.0),
    },
    "run": {
        "seed": (_int, 1),
        "trials": (_int, 2000),
        "workers": (_int, 1),
    },
    "sweep": {
        "preset": (_str, ""),
        "K_over_M": (float, 0.1),
        "K_over_T": (float, 0.01),
        "tau_over_T": (_opt_float, None),
    },
}


def parse_axis(text: str) -> list:
    """``"1:12"`` -> ``[1, ..., 12]``; ``"1e2, 1e4"`` -> ``[100.0, 10000.0]``."""
    text = text.strip()
    if ":" in text:
        parts = [_int(p) for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError(f"range needs start:stop[:step], got {text!r}")
        step = parts[2] if len(parts) == 3 else 1
        if step <= 0:
            raise ValueError("range step must be positive")
        return list(range(parts[0], parts[1] + 1, step))
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty value list")
    return [_opt_float(v) for v in vals]


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    axes: list = field(default_factory=list)
    path: str | None = None

    def __getitem__(self, section):
        return self.values[section]

    def snapshot(self) -> dict:
        snap = {s: dict(v) for s, v in self.values.items()}
        snap["system"]["beta"] = list(snap["system"]["beta"])
        snap["sweep"]["axes"] = {n: list(v) for n, v in self.axes}
        return snap

    def calibration(self) -> tuple[BackoffCalibration, Path]:
        from .calibration import default_calibration_path

        table = self["calibration"]["table"]
        if table:
            path = Path(table)
            return load_calibration(path, self["calibration"]["criterion_db"]), path
        return default_calibration(), default_calibration_path()

    def power_params(self) -> AdcPowerParams:
        p = self["power"]
        return AdcPowerParams(p["omega"], p["c1"], p["c2"], p["c3"], p["c4"], self["system"]["B"])

    def uplink(self, calib: BackoffCalibration | None = None) -> UplinkConfig:
        s = self["system"]
        calib = calib or default_calibration()
        return UplinkConfig.from_snr_db(
            s["snr_db"], p_n=s["p_n"], M=s["M"], K=s["K"], T=s["T"], tau=s["tau"], b=s["b"],
            receiver=s["receiver"], B=s["B"], mode=s["mode"], beta=s["beta"],
            mu=calib.chord(s["b"]), pqn_noise=s["pqn_noise"], n_data_symbols=s["n_data_symbols"],
        )

    def sweep_spec(self, receivers, calib: BackoffCalibration | None = None, preset_name=None) -> SweepSpec:
        s, sw, run = self["system"], self["sweep"], self["run"]
        name = preset_name or sw["preset"]
        power = AdcPowerParams(*(self["power"][k] for k in ("omega", "c1", "c2", "c3", "c4")))
        extra = {
            "B": s["B"], "p_n": s["p_n"], "pqn_noise": s["pqn_noise"],
            "n_data_symbols": s["n_data_symbols"], "b_ref": self["power"]["b_ref"],
        }
        if name:
            spec = preset(name, receivers=receivers, n_trials=run["trials"], seed=run["seed"])
            spec.fixed.update(extra)
        else:
            axis_names = {n for n, _ in self.axes}
            base = {
                "b": s["b"], "M": s["M"], "snr_db": s["snr_db"], "alpha": self["power"]["alpha"],
                "K_over_M": sw["K_over_M"], "K_over_T": sw["K_over_T"], "tau_over_T": sw["tau_over_T"],
            }
            fixed = {k: v for k, v in base.items() if k not in axis_names}
            fixed.update(extra)
            spec = SweepSpec(axes=self.axes, fixed=fixed, receivers=tuple(receivers),
                             n_trials=run["trials"], seed=run["seed"])
        spec.mode = s["mode"]
        spec.power = power
        spec.calibration = calib
        return spec


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Parse ``path`` (or defaults only) and apply ``{(section, key): value}`` overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise InvalidParameterError(f"{path}: {exc}") from None

    problems = []
    values = {}
    axes = []
    for section in parser.sections():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        values[section] = {k: default for k, (_, default) in keys.items()}
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if section == "sweep" and key.startswith("axis."):
                name = key[5:]
                if name not in AXIS_NAMES:
                    problems.append(f"[sweep] unknown axis {name!r}")
                    continue
                try:
                    axes.append((name, parse_axis(raw)))
                except ValueError as exc:
                    problems.append(f"[sweep] {key}: {exc}")
                continue
            if key not in keys:
                problems.append(f"[{section}] unknown key {key!r}")
                continue
            try:
                values[section][key] = keys[key][0](raw)
            except ValueError as exc:
                problems.append(f"[{section}] {key} = {raw!r}: {exc}")
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            values[section][key] = value

    cfg = RunConfig(values, axes, str(path) if path else None)
    problems += _semantic_problems(cfg)
    if problems:
        err = InvalidParameterError("invalid configuration:\n  " + "\n  ".join(problems))
        err.problems = problems
        raise err
    return cfg


def _semantic_problems(cfg: RunConfig) -> list[str]:
    s = cfg["system"]
    out = []
    try:
        UplinkConfig.from_snr_db(
            s["snr_db"], p_n=s["p_n"] if s["p_n"] > 0 else 1.0, M=s["M"], K=s["K"], T=s["T"],
            tau=s["tau"], b=s["b"], receiver=s["receiver"], B=s["B"], mode=s["mode"],
            beta=s["beta"], mu=1.0, pqn_noise=s["pqn_noise"], n_data_symbols=s["n_data_symbols"],
        )
    except InvalidParameterError as exc:
        out += [f"[system] {p}" for p in str(exc).split("; ")]
    if not s["p_n"] > 0:
        out.append(f"[system] p_n must be positive, got {s['p_n']}")
    p = cfg["power"]
    try:
        AdcPowerParams(p["omega"], p["c1"], p["c2"], p["c3"], p["c4"], s["B"] if s["B"] > 0 else 1.0)
    except InvalidParameterError as exc:
        out += [f"[power] {q}" for q in str(exc).split("; ")]
    if p["alpha"] < 0:
        out.append(f"[power] alpha must be >= 0, got {p['alpha']}")
    if p["b_ref"] < 1:
        out.append(f"[power] b_ref must be >= 1, got {p['b_ref']}")
    c = cfg["calibration"]
    if not 1 <= c["b_min"] <= c["b_max"]:
        out.append(f"[calibration] invalid resolution range [{c['b_min']}, {c['b_max']}]")
    if c["n_samples"] < 10**5:
        out.append(f"[calibration] n_samples must be >= 1e5, got {c['n_samples']}")
    if c["relax_db"] < 0:
        out.append(f"[calibration] relax_db must be >= 0, got {c['relax_db']}")
    r = cfg["run"]
    if r["trials"] < 1:
        out.append(f"[run] trials must be >= 1, got {r['trials']}")
    if r["workers"] < 1:
        out.append(f"[run] workers must be >= 1, got {r['workers']}")
    sw = cfg["sweep"]
    if sw["preset"] and sw["preset"].lower() not in ("fig4", "fig5", "fig6"):
        out.append(f"[sweep] unknown preset {sw['preset']!r}")
    if not 0 < sw["K_over_M"] <= 1:
        out.append(f"[sweep] K_over_M must lie in (0, 1], got {sw['K_over_M']}")
    if not 0 < sw["K_over_T"] <= 1:
        out.append(f"[sweep] K_over_T must lie in (0, 1], got {sw['K_over_T']}")
    names = [n for n, _ in cfg.axes]
    if len(set(names)) != len(names):
        out.append("[sweep] duplicate axis")
    return out
