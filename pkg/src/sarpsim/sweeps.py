"""Experiment runners behind the ``sarp-sim`` subcommands.

Dynamics sweeps are cut into fixed-size chunks of grid points. Each chunk is
integrated as one batch, so results depend only on the chunk layout, never on
how many worker processes execute them.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import photons as ph
from . import qkd
from .config import SweepConfig
from .constants import wavelength_to_detuning
from .integrate import IntegrationError
from .pulse import PulseError, SlpRecipe, TimeGrid, default_shaper

log = logging.getLogger(__name__)

CHUNK = 128  # points per batched integration; fixed so output never depends on --jobs


@dataclass
class Table:
    columns: list[str]
    rows: np.ndarray
    summary: dict[str, object] = field(default_factory=dict)
    extra_files: dict[str, object] = field(default_factory=dict)


# -- dynamics setup -----------------------------------------------------------------

@dataclass(frozen=True)
class DynSetup:
    params: dyn.QdParams
    input_fwhm: float = 2.0
    gdd: float = 0.0
    sigma: float = 0.22
    stim: dyn.Stim | None = None
    decay: bool = False
    tol: float = 1e-8
    efficiency: float = 1.0
    collection_pol: str = "H"

    def recipe(self, slit_nm: float, gdd: float | None = None) -> SlpRecipe:
        grid = TimeGrid.symmetric()
        shaper = default_shaper(float(wavelength_to_detuning(slit_nm)), grid, self.sigma)
        return SlpRecipe(self.input_fwhm, 0.0, shaper, self.gdd if gdd is None else gdd, grid)

    def options(self) -> dyn.SimOptions:
        if self.decay:
            return dyn.SimOptions.with_decay(self.params, integrator_tol=self.tol)
        return dyn.SimOptions(integrator_tol=self.tol)

    def calibration(self) -> dyn.PiCalibration:
        return _calibration(self.params, self.input_fwhm, self.sigma, self.tol)


@lru_cache(maxsize=8)
def _calibration(params, input_fwhm, sigma, tol) -> dyn.PiCalibration:
    recipe = DynSetup(params, input_fwhm, sigma=sigma).recipe(796.0, gdd=0.0)
    return dyn.calibrate_pi_power(params, recipe, dyn.SimOptions(integrator_tol=tol))


def setup_from_config(cfg: SweepConfig) -> DynSetup:
    q = cfg.section("qd")
    params = dyn.QdParams(q["binding_energy_mev"], q["gamma_xx"], q["gamma_x"], q["x_wavelength_nm"])
    s = cfg.section("stim")
    stim = None
    if s["enabled"]:
        stim = dyn.default_stim(s["area"], s["fwhm"], s["polarization"], s["delay"],
                                anchor=s["anchor"])
    return DynSetup(params, cfg["pulse.input_fwhm"], cfg["pulse.gdd"], cfg["pulse.smoothing_sigma"],
                    stim, cfg["sim.decay"], cfg["sim.tol"], cfg["detection.efficiency"],
                    cfg["detection.collection_pol"])


def eval_points(setup: DynSetup, cal: dyn.PiCalibration, points,
                with_fidelity: bool = True) -> np.ndarray:
    """Columns (f_prep, x_counts, pnc_visibility) for ``(power_pi, slit_nm)`` points."""
    recipes = {}
    fields = []
    for p, slit in points:
        r = recipes.setdefault(slit, setup.recipe(slit))
        fields.append(dyn.tpe_drive(cal, p, r))
    f, c, v = dyn.observables_batch(setup.params, fields, setup.stim, setup.options(),
                                    setup.collection_pol, with_fidelity)
    return np.column_stack([f, setup.efficiency * c, v])


_NUMERIC = (IntegrationError, dyn.DynamicsError, PulseError, FloatingPointError)


def _eval_chunk(args):
    setup, cal, points, with_fidelity = args
    try:
        return eval_points(setup, cal, points, with_fidelity), 0
    except _NUMERIC:
        if len(points) == 1:
            return np.full((1, 3), np.nan), 1
    out, fails = [], 0
    for pt in points:
        r, f = _eval_chunk((setup, cal, [pt], with_fidelity))
        out.append(r)
        fails += f
    return np.vstack(out), fails


def run_points(setup: DynSetup, points, jobs: int = 1, cal: dyn.PiCalibration | None = None,
               with_fidelity: bool = True):
    """Evaluate all points; returns ``(values (n, 3), n_failed)``."""
    cal = cal or setup.calibration()
    points = [(float(p), float(s)) for p, s in points]
    tasks = [(setup, cal, points[i:i + CHUNK], with_fidelity)
             for i in range(0, len(points), CHUNK)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_eval_chunk, tasks))
    else:
        results = [_eval_chunk(t) for t in tasks]
    vals = np.vstack([r for r, _ in results]) if results else np.empty((0, 3))
    return vals, sum(f for _, f in results)


# -- dynamics experiments --------------------------------------------------------------

def rabi(cfg: SweepConfig, jobs: int = 1) -> Table:
    setup = setup_from_config(cfg)
    powers = cfg.axes["power"].values()
    vals, fails = run_points(setup, [(p, cfg["pulse.slit_center_nm"]) for p in powers], jobs)
    cal = setup.calibration()
    return Table(["power_pi", "f_prep", "x_counts", "pnc_visibility"],
                 np.column_stack([powers, vals]),
                 {"p_pi": cal.p_pi, "failed_points": fails})


def fidelity_scan(cfg: SweepConfig, jobs: int = 1) -> Table:
    t = rabi(cfg, jobs)
    return Table(["power_pi", "f_prep"], t.rows[:, :2], t.summary)


def map2d(cfg: SweepConfig, jobs: int = 1) -> Table:
    setup = setup_from_config(cfg)
    wl = cfg.axes["wavelength"].values()
    pw = cfg.axes["power"].values()
    W, P = np.meshgrid(wl, pw, indexing="ij")  # row-major, wavelength outer
    vals, fails = run_points(setup, list(zip(P.ravel(), W.ravel())), jobs)
    rows = np.column_stack([W.ravel(), P.ravel(), vals[:, 1], vals[:, 0]])
    return Table(["wavelength_nm", "power_pi", "x_counts", "f_prep"], rows,
                 {"failed_points": fails, "p_pi": setup.calibration().p_pi})


@dataclass(frozen=True)
class RobustnessRun:
    lo: float
    hi: float
    n_steps: int = 1000
    gdd: float = 45.0
    stim: bool = True
    seed: int = 0
    shot_noise: bool = False
    counts_per_bin: float = 1e5


def mean_abs_rel_deviation(c) -> float:
    c = np.asarray(c, dtype=float)
    m = c.mean()
    return float(np.mean(np.abs(c - m)) / m) if m > 0 else 0.0


def robustness(run: RobustnessRun, setup: DynSetup | None = None, jobs: int = 1):
    """Counts for ``n_steps`` uniformly drawn powers; returns (powers, counts, D).

    ``run.gdd`` and ``run.stim`` override the corresponding parts of ``setup``.
    """
    if run.hi < run.lo:
        raise ValueError("need lo <= hi")
    setup = setup or DynSetup(dyn.QdParams())
    stim = (setup.stim or dyn.default_stim()) if run.stim else None
    setup = replace(setup, gdd=run.gdd, stim=stim)
    rng = np.random.default_rng([run.seed, 0x3C])
    powers = rng.uniform(run.lo, run.hi, run.n_steps) if run.hi > run.lo else np.full(run.n_steps, run.lo)
    uniq, inv = np.unique(powers, return_inverse=True)
    vals, fails = run_points(setup, [(p, 796.0) for p in uniq], jobs, with_fidelity=False)
    if fails:
        raise IntegrationError(f"{fails} robustness steps failed")
    counts = vals[inv, 1]
    if run.shot_noise:
        counts = rng.poisson(counts * run.counts_per_bin) / run.counts_per_bin
    return powers, counts, mean_abs_rel_deviation(counts)


def robustness_kind(cfg: SweepConfig, jobs: int = 1) -> Table:
    setup = setup_from_config(cfg)
    r = cfg.section("robustness")
    run = RobustnessRun(r["lo"], r["hi"], r["n_steps"], setup.gdd, setup.stim is not None,
                        cfg.seed, r["shot_noise"], r["counts_per_bin"])
    powers, counts, d = robustness(run, setup, jobs)
    return Table(["step", "power_pi", "x_counts"],
                 np.column_stack([np.arange(len(powers)), powers, counts]),
                 {"mean_counts": float(np.mean(counts)), "mean_abs_rel_deviation": d})


# -- Monte-Carlo experiments ---------------------------------------------------------

def emission_from_config(cfg: SweepConfig) -> ph.EmissionModel:
    m = cfg.section("mc")
    return ph.EmissionModel(m["f_prep"], cfg["qd.gamma_xx"], cfg["qd.gamma_x"], m["stim_enabled"],
                            m["stim_delay"], m["stim_success_prob"], m["stim_spread"],
                            m["p_multi"], m["rep_period_ns"])


def detector_from_config(cfg: SweepConfig) -> ph.DetectorModel:
    d = cfg.section("det")
    return ph.DetectorModel(d["efficiency"], d["dark_rate"], d["jitter"])


def hist_from_config(cfg: SweepConfig) -> ph.HistConfig:
    h = cfg.section("hist")
    return ph.HistConfig(h["bin_width"], h["window"], h["peak_window"], 1e3 * cfg["mc.rep_period_ns"])


def _hist_table(hist: ph.CorrelationHistogram, summary) -> Table:
    return Table(["bin_center_ps", "counts"], np.column_stack([hist.bin_centers, hist.counts]), summary)


def mc_crosscorr(cfg: SweepConfig, jobs: int = 1) -> Table:
    model, det = emission_from_config(cfg), detector_from_config(cfg)
    rec = ph.sample_emissions(model, cfg["mc.n_pulses"], cfg.seed)
    pol = ph.SIGMA_PLUS if cfg["mc.pol_filter"] else None
    start = ph.detect(rec.xx_photons(), det, pol, cfg.seed, rec.span, channel=1)
    stop = ph.detect(rec.x_photons(), det, pol, cfg.seed, rec.span, channel=2)
    hist = ph.cross_correlate(start, stop, hist_from_config(cfg))
    est = ph.fidelity_eq1(hist, cfg["mc.c_pol"])
    t = _hist_table(hist, {"fidelity": est.value, "fidelity_raw": est.raw,
                           "exceeds_one": est.exceeds_one})
    if cfg["mc.write_clicks"]:
        t.extra_files["clicks"] = [start, stop]
    return t


def mc_hbt(cfg: SweepConfig, jobs: int = 1) -> Table:
    det = detector_from_config(cfg)
    n = cfg["mc.n_pulses"]
    if cfg["mc.source"] == "poisson":
        photons = ph.sample_poisson_photons(cfg["mc.poisson_mean"], n, cfg["qd.gamma_x"], cfg.seed,
                                            cfg["mc.rep_period_ns"])
        span = (0.0, n * 1e3 * cfg["mc.rep_period_ns"])
    else:
        rec = ph.sample_emissions(emission_from_config(cfg), n, cfg.seed)
        photons, span = rec.x_photons(), rec.span
    stream = ph.detect(photons, det, None, cfg.seed, span)
    res = ph.hbt_g2(stream, hist_from_config(cfg), cfg.seed)
    t = _hist_table(res.histogram, {"g2_zero": res.g2_zero, "side_peak_mean": res.side_mean})
    if cfg["mc.write_clicks"]:
        t.extra_files["clicks"] = [stream]
    return t


def mc_hom(cfg: SweepConfig, jobs: int = 1) -> Table:
    res = ph.hom_visibility(emission_from_config(cfg), detector_from_config(cfg),
                            cfg["mc.n_pulses"], cfg.seed, hist_from_config(cfg),
                            cfg["mc.force_distinguishable"])
    return _hist_table(res.histogram, {"visibility": res.visibility, "a_center": res.a_center,
                                       "a_uncorrelated": res.a_uncorrelated})


def mc_pnc(cfg: SweepConfig, jobs: int = 1) -> Table:
    m = cfg.section("mc")
    phases = np.linspace(0.0, 2 * np.pi, m["n_phases"])
    scan = ph.mzi_pnc_scan(m["v_true"], m["mean_counts"], phases, m["n_per_phase"], cfg.seed)
    k = m["n_per_phase"]
    rows = np.column_stack([np.repeat(phases, k), np.tile(np.arange(k), len(phases)),
                            scan.counts[..., 0].ravel(), scan.counts[..., 1].ravel()])
    return Table(["phase_rad", "repeat", "port1", "port2"], rows,
                 {"v_est": scan.v_est, "v_true": m["v_true"]})


# -- protocol-level experiments --------------------------------------------------------

def qkd_params_from_config(cfg: SweepConfig) -> qkd.QkdParams:
    q = cfg.section("qkd")
    return qkd.QkdParams(q["mu"], q["rep_rate"], q["accum_time"], q["f_ec"], q["q_sift"], q["e_det"],
                         q["p_dc"], q["eps"], q["g2"], q["q_key"], q["mu_assumed"] or None)


def qkd_rate(cfg: SweepConfig, jobs: int = 1) -> Table:
    params = qkd_params_from_config(cfg)
    mode = cfg["qkd.mode"]
    rows = []
    for loss in cfg.axes["loss_db"].values():
        r = qkd.secure_key_rate(params, qkd.ChannelParams(float(loss), cfg["qkd.eta_bob"]), mode)
        rows.append([loss, r.p_click, r.qber, r.delta_tagged, r.r_asym,
                     np.nan if r.r_finite is None else r.r_finite, r.secure_bits])
    tl = qkd.tolerable_loss(params, mode, cfg["qkd.eta_bob"])
    return Table(["loss_db", "p_click", "qber", "delta", "r_asym", "r_finite", "secure_bits"],
                 np.array(rows), {"tolerable_loss_db": "none" if tl is None else tl})


def coinflip(cfg: SweepConfig, jobs: int = 1) -> Table:
    c = cfg.section("coinflip")
    cf = qkd.CoinFlipParams(c["a"], c["k_rounds"], c["mu_nominal"], c["g2"], c["eta"])
    rows = []
    for mu in cfg.axes["mu"].values():
        r = qkd.coinflip_fairness(cf, float(mu))
        rows.append([mu, r.p_cheat_bob, r.p_cheat_alice, r.diff])
    return Table(["mu", "p_cheat_bob", "p_cheat_alice", "diff"], np.array(rows))


def pnc_curve(cfg: SweepConfig, jobs: int = 1) -> Table:
    theta_pi = cfg.axes["theta_pi"].values()
    theta = theta_pi * math.pi
    if cfg["pnc.excitation"] == "resonant":
        v = qkd.pnc_resonant(theta)
    else:
        setup = setup_from_config(cfg)
        vals, _ = run_points(setup, [(t, 796.0) for t in theta_pi], jobs)
        v = vals[:, 2]
    return Table(["theta_rad", "theta_pi", "pnc_visibility"], np.column_stack([theta, theta_pi, v]))


RUNNERS = {
    "rabi": rabi, "map2d": map2d, "fidelity-scan": fidelity_scan, "robustness": robustness_kind,
    "mc-crosscorr": mc_crosscorr, "mc-hbt": mc_hbt, "mc-hom": mc_hom, "mc-pnc": mc_pnc,
    "qkd-rate": qkd_rate, "coinflip": coinflip, "pnc-curve": pnc_curve,
}


# -- output -------------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _summary_lines(summary) -> list[str]:
    out = []
    for k, v in summary.items():
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        out.append(f"# @ {k} = {v}")
    return out


def table_text(cfg: SweepConfig, table: Table) -> str:
    lines = [f"# {ln}" for ln in cfg.resolved_lines()]
    lines += _summary_lines(table.summary)
    lines.append(",".join(table.columns))
    for row in table.rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


PLOT_TEMPLATE = '''"""Plot {csv} (generated; needs numpy and matplotlib)."""
import sys
from pathlib import Path

import numpy as np
import matplotlib.pyplot as plt

csv = Path(__file__).with_name("{csv}")
data = np.genfromtxt(csv, delimiter=",", names=True, comments="#")
cols = data.dtype.names
fig, ax = plt.subplots()
{body}
fig.tight_layout()
out = csv.with_suffix(".png")
fig.savefig(out, dpi=150)
print(out)
'''


def _plot_body(kind: str, columns: list[str]) -> str:
    if kind == "map2d":
        return ("wl = np.unique(data['wavelength_nm']); pw = np.unique(data['power_pi'])\n"
                "z = data['x_counts'].reshape(len(wl), len(pw)).T\n"
                "m = ax.pcolormesh(wl, pw, z, shading='auto'); fig.colorbar(m, ax=ax, label='x_counts')\n"
                "ax.set_xlabel('slit center (nm)'); ax.set_ylabel('power (pi units)')")
    x, ys = columns[0], [c for c in columns[1:] if c not in ("repeat", "step")]
    if kind == "robustness":
        x, ys = "step", ["x_counts"]
    lines = [f"ax.plot(data[{x!r}], data[{y!r}], label={y!r})" for y in ys]
    lines.append(f"ax.set_xlabel({x!r}); ax.legend()")
    return "\n".join(lines)


def run_config(cfg: SweepConfig, out_dir=None, jobs: int = 1) -> dict[str, Path]:
    """Run one experiment and write its outputs; returns ``{role: path}``."""
    table = RUNNERS[cfg.kind](cfg, jobs)
    out_dir = Path(out_dir) if out_dir is not None else Path(cfg.source).resolve().parent \
        if cfg.source and cfg.source != "<string>" else Path.cwd()
    name = Path(cfg.output_name())
    path = name if name.is_absolute() else out_dir / name
    written = {}
    if "clicks" in table.extra_files:
        cpath = path.with_name(path.stem + "_clicks.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        os.close(fd)
        try:
            ph.write_clicks_csv(table.extra_files["clicks"], tmp)
            os.replace(tmp, cpath)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        written["clicks"] = cpath
    _atomic_write(path, table_text(cfg, table))
    written["csv"] = path
    if cfg.plot:
        ppath = path.with_name(f"plot_{path.stem}.py")
        _atomic_write(ppath, PLOT_TEMPLATE.format(csv=path.name, body=_plot_body(cfg.kind, table.columns)))
        written["plot"] = ppath
    for k, v in table.summary.items():
        log.info("%s: %s = %s", cfg.kind, k, v)
    return written
