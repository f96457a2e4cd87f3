"""Flat ``section.key = value`` experiment configs.

The format is the dotted-key subset of TOML, parsed with ``tomllib``/``tomli``
and flattened. Every key is checked against :data:`SCHEMA` before anything is
computed; errors carry the offending line number.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, msg, key=None, line=None, source=None):
        where = ""
        if source:
            where += f"{source}"
        if line is not None:
            where += f":{line}"
        if key:
            where += f" [{key}]"
        super().__init__(f"{where}: {msg}" if where else msg)
        self.key, self.line = key, line


KINDS = ("rabi", "map2d", "fidelity-scan", "robustness", "mc-crosscorr", "mc-hbt",
         "mc-hom", "mc-pnc", "qkd-rate", "coinflip", "pnc-curve")

_num = (int, float)

# section -> key -> (accepted types, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "": {"kind": (str, None), "seed": (int, 0), "output": (str, ""), "plot": (bool, False)},
    "qd": {"binding_energy_mev": (_num, 4.0), "gamma_xx": (_num, 1 / 120),
           "gamma_x": (_num, 1 / 250), "x_wavelength_nm": (_num, 795.0)},
    "pulse": {"input_fwhm": (_num, 2.0), "gdd": (_num, 0.0), "smoothing_sigma": (_num, 0.22),
              "slit_center_nm": (_num, 796.0)},
    "stim": {"enabled": (bool, False), "area": (_num, math.pi), "fwhm": (_num, 2.0),
             "delay": (_num, 7.0), "polarization": (str, "H"), "anchor": (str, "trailing_edge")},
    "sim": {"decay": (bool, False), "tol": (_num, 1e-8)},
    "detection": {"efficiency": (_num, 1.0), "collection_pol": (str, "H")},
    "robustness": {"lo": (_num, 1.0), "hi": (_num, 3.0), "n_steps": (int, 1000),
                   "shot_noise": (bool, False), "counts_per_bin": (_num, 1e5)},
    "mc": {"n_pulses": (int, 1_000_000), "f_prep": (_num, 1.0), "p_multi": (_num, 0.0),
           "stim_enabled": (bool, False), "stim_delay": (_num, 10.0),
           "stim_success_prob": (_num, 1.0), "stim_spread": (_num, 0.0),
           "rep_period_ns": (_num, 12.5), "c_pol": (_num, 2.0), "pol_filter": (bool, True),
           "source": (str, "cascade"), "poisson_mean": (_num, 0.1),
           "force_distinguishable": (bool, False), "write_clicks": (bool, False),
           "v_true": (_num, 0.5), "mean_counts": (_num, 1e4), "n_phases": (int, 25),
           "n_per_phase": (int, 1)},
    "det": {"efficiency": (_num, 1.0), "dark_rate": (_num, 0.0), "jitter": (_num, 0.0)},
    "hist": {"bin_width": (_num, 100.0), "window": (_num, 62500.0), "peak_window": (_num, 2000.0)},
    "qkd": {"mu": (_num, 0.1), "rep_rate": (_num, 8e7), "accum_time": (_num, 100.0),
            "f_ec": (_num, 1.2), "q_sift": (_num, 0.5), "e_det": (_num, 0.02),
            "p_dc": (_num, 1e-7), "eps": (_num, 1e-9), "g2": (_num, 0.005),
            "q_key": (_num, 0.9), "mu_assumed": (_num, 0.0), "eta_bob": (_num, 1.0),
            "mode": (str, "finite")},
    "coinflip": {"a": (_num, 0.9), "k_rounds": (int, 500), "mu_nominal": (_num, 0.1),
                 "g2": (_num, 0.005), "eta": (_num, 1.0)},
    "pnc": {"excitation": (str, "resonant")},
}

AXIS_KEYS = {"min": _num, "max": _num, "n_points": int, "scale": str}

# kind -> (required axes, optional axes)
KIND_AXES = {
    "rabi": (("power",), ()),
    "map2d": (("wavelength", "power"), ()),
    "fidelity-scan": (("power",), ()),
    "robustness": ((), ()),
    "mc-crosscorr": ((), ()),
    "mc-hbt": ((), ()),
    "mc-hom": ((), ()),
    "mc-pnc": ((), ()),
    "qkd-rate": (("loss_db",), ()),
    "coinflip": (("mu",), ()),
    "pnc-curve": (("theta_pi",), ()),
}

_DYN = ("qd", "pulse", "stim", "sim", "detection")
_MC = ("qd", "mc", "det", "hist")
KIND_SECTIONS = {
    "rabi": _DYN, "map2d": _DYN, "fidelity-scan": _DYN, "robustness": _DYN + ("robustness",),
    "pnc-curve": _DYN + ("pnc",), "mc-crosscorr": _MC, "mc-hbt": _MC, "mc-hom": _MC,
    "mc-pnc": _MC, "qkd-rate": ("qkd",), "coinflip": ("coinflip",),
}

CHOICES = {
    "stim.polarization": ("H", "V"),
    "stim.anchor": ("trailing_edge", "peak"),
    "detection.collection_pol": ("H", "V"),
    "mc.source": ("cascade", "poisson"),
    "qkd.mode": ("asymptotic", "finite"),
    "pnc.excitation": ("resonant", "chirped"),
}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    n_points: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([float(self.min)])
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.n_points)
        return np.linspace(self.min, self.max, self.n_points)


@dataclass
class SweepConfig:
    kind: str
    seed: int
    output: str
    plot: bool
    axes: dict[str, Axis]
    values: dict[str, object]
    source: str = "<string>"
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def output_name(self) -> str:
        return self.output or f"{self.kind}.csv"

    def resolved_lines(self) -> list[str]:
        """Fully resolved config as ``key = value`` lines (parseable again)."""
        out = [f"kind = {_fmt(self.kind)}", f"seed = {self.seed}",
               f"output = {_fmt(self.output_name())}", f"plot = {_fmt(self.plot)}"]
        for ax in self.axes.values():
            for k in AXIS_KEYS:
                out.append(f"axis.{ax.name}.{k} = {_fmt(getattr(ax, k))}")
        out += [f"{k} = {_fmt(v)}" for k, v in sorted(self.values.items())]
        return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return json.dumps(v)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def _line_of(text: str, key: str):
    pat = re.compile(r"^\s*" + r"\s*\.\s*".join(re.escape(p) for p in key.split(".")) + r"\s*=")
    for i, ln in enumerate(text.splitlines(), 1):
        if pat.match(ln):
            return i
    return None


def _type_ok(v, types) -> bool:
    if isinstance(v, bool):
        return types is bool
    if types is bool:
        return False
    if types is int:
        return isinstance(v, int)
    return isinstance(v, types)


def parse_config(text: str, source: str = "<string>", kind: str | None = None) -> SweepConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None,
                          source=source) from None
    flat = dict(_flatten(raw))

    def err(msg, key):
        return ConfigError(msg, key, _line_of(text, key), source)

    cfg_kind = flat.get("kind", kind)
    if kind is not None and cfg_kind != kind:
        raise err(f"config is for {cfg_kind!r}, not {kind!r}", "kind")
    if cfg_kind not in KINDS:
        raise err(f"unknown or missing experiment kind {cfg_kind!r}; expected one of {KINDS}", "kind")

    values: dict[str, object] = {}
    axes_raw: dict[str, dict] = {}
    for key, v in flat.items():
        parts = key.split(".")
        if parts[0] == "axis":
            if len(parts) != 3 or parts[2] not in AXIS_KEYS:
                raise err("axis entries look like axis.<name>.{min,max,n_points,scale}", key)
            if not _type_ok(v, AXIS_KEYS[parts[2]]):
                raise err(f"wrong type {type(v).__name__}", key)
            axes_raw.setdefault(parts[1], {})[parts[2]] = v
            continue
        section, name = (parts[0], ".".join(parts[1:])) if len(parts) > 1 else ("", parts[0])
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise err("unknown key", key)
        if section and section not in KIND_SECTIONS[cfg_kind]:
            raise err(f"section {section!r} is not used by {cfg_kind!r}", key)
        types, _ = SCHEMA[section][name]
        if not _type_ok(v, types):
            raise err(f"expected {getattr(types, '__name__', 'number')}, got {type(v).__name__}", key)
        if isinstance(v, float) and not math.isfinite(v):
            raise err("value must be finite", key)
        if key in CHOICES and v not in CHOICES[key]:
            raise err(f"must be one of {CHOICES[key]}", key)
        values[key] = float(v) if types is _num else v

    required, optional = KIND_AXES[cfg_kind]
    axes = {}
    for name, spec in axes_raw.items():
        key = f"axis.{name}"
        if name not in required + optional:
            raise err(f"axis {name!r} not used by {cfg_kind!r}", f"{key}.min")
        missing = [k for k in ("min", "max", "n_points") if k not in spec]
        if missing:
            raise err(f"axis {name!r} missing {missing}", f"{key}.{next(iter(spec))}")
        lo, hi, n = float(spec["min"]), float(spec["max"]), spec["n_points"]
        scale = spec.get("scale", "linear")
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise err("axis bounds must be finite", f"{key}.min")
        if n < 1:
            raise err("n_points must be >= 1", f"{key}.n_points")
        if hi < lo:
            raise err("max must be >= min", f"{key}.max")
        if scale not in ("linear", "log"):
            raise err("scale must be 'linear' or 'log'", f"{key}.scale")
        if scale == "log" and lo <= 0:
            raise err("log axes need min > 0", f"{key}.min")
        axes[name] = Axis(name, lo, hi, n, scale)
    for name in required:
        if name not in axes:
            raise ConfigError(f"{cfg_kind!r} needs axis.{name}.min/max/n_points", f"axis.{name}",
                              None, source)

    explicit = set(values)
    top = {k: values.pop(k, SCHEMA[""][k][1]) for k in ("seed", "output", "plot")}
    values.pop("kind", None)
    for section in KIND_SECTIONS[cfg_kind]:
        for name, (types, default) in SCHEMA[section].items():
            values.setdefault(f"{section}.{name}", float(default) if types is _num else default)
    cfg = SweepConfig(cfg_kind, top["seed"], top["output"], top["plot"], axes, values, source, explicit)
    _check_ranges(cfg, err)
    return cfg


def _check_ranges(cfg: SweepConfig, err) -> None:
    v = cfg.values
    positive = ["qd.binding_energy_mev", "qd.gamma_xx", "qd.gamma_x", "pulse.input_fwhm",
                "pulse.smoothing_sigma", "stim.fwhm", "sim.tol",
                "mc.rep_period_ns", "mc.mean_counts", "hist.bin_width", "hist.window",
                "hist.peak_window", "qkd.rep_rate", "qkd.accum_time", "coinflip.mu_nominal",
                "robustness.counts_per_bin"]
    for k in filter(v.__contains__, positive):
        if not v[k] > 0:
            raise err("must be positive", k)
    unit = ["detection.efficiency", "mc.f_prep", "mc.p_multi", "mc.stim_success_prob",
            "det.efficiency", "qkd.mu", "qkd.q_sift", "qkd.e_det", "qkd.p_dc", "qkd.q_key",
            "qkd.eta_bob", "qkd.mu_assumed", "coinflip.a", "coinflip.eta", "mc.v_true"]
    for k in filter(v.__contains__, unit):
        if not 0.0 <= v[k] <= 1.0:
            raise err("must lie in [0, 1]", k)
    for k in filter(v.__contains__, ("mc.n_pulses", "mc.n_phases", "mc.n_per_phase",
                                     "robustness.n_steps", "coinflip.k_rounds")):
        if v[k] < 1:
            raise err("must be >= 1", k)
    for k in filter(v.__contains__, ("det.dark_rate", "det.jitter", "mc.stim_spread",
                                     "mc.poisson_mean")):
        if v[k] < 0:
            raise err("must be non-negative", k)
    if "qkd.eps" in v and not 0 < v["qkd.eps"] < 1:
        raise err("must lie in (0, 1)", "qkd.eps")
    if "qkd.f_ec" in v and v["qkd.f_ec"] < 1:
        raise err("must be >= 1", "qkd.f_ec")
    if "robustness.lo" in v and not 0 <= v["robustness.lo"] <= v["robustness.hi"]:
        raise err("need 0 <= lo <= hi", "robustness.hi")
    if cfg.kind == "mc-pnc" and v["mc.n_phases"] < 3:
        raise err("need >= 3 phases", "mc.n_phases")
    ax = cfg.axes
    if "power" in ax and ax["power"].min < 0:
        raise err("powers must be non-negative", "axis.power.min")
    if "loss_db" in ax and ax["loss_db"].min < 0:
        raise err("loss must be non-negative", "axis.loss_db.min")
    if "mu" in ax and ax["mu"].min <= 0:
        raise err("mu must be positive", "axis.mu.min")
    if "mu" in ax and ax["mu"].max > 1:
        raise err("mu must be <= 1", "axis.mu.max")
    if "theta_pi" in ax and ax["theta_pi"].min < 0:
        raise err("areas must be non-negative", "axis.theta_pi.min")


def config_text_from_csv(text: str) -> str:
    """Recover the echoed config from a CSV header (``# key = value`` lines)."""
    lines = []
    for ln in text.splitlines():
        if not ln.startswith("#"):
            break
        body = ln[1:].strip()
        if body and not body.startswith("@"):
            lines.append(body)
    return "\n".join(lines) + "\n"


def load_config(path, kind: str | None = None) -> SweepConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from None
    if path.suffix == ".csv":
        text = config_text_from_csv(text)
    return parse_config(text, str(path), kind)
