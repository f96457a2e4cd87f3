"""Monte-Carlo photon streams from the XX-X cascade and correlation estimators.

Times are in ps. Random numbers come from per-block substreams keyed by
``(seed, block index)`` so any pulse range is reproduced bit-exactly no matter
how a run is partitioned.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

BLOCK = 1 << 16  # pulses per random substream
SIGMA_PLUS, SIGMA_MINUS = 1, -1


class StatisticsError(RuntimeError):
    """Too few counts for a stable estimate."""

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class UndefinedFidelityError(ZeroDivisionError):
    pass


class FitError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


@dataclass(frozen=True)
class EmissionModel:
    f_prep: float = 1.0
    gamma_xx: float = 1.0 / 120.0
    gamma_x: float = 1.0 / 250.0
    stim_enabled: bool = False
    stim_delay: float = 10.0  # ps, XX emission time when stimulated
    stim_success_prob: float = 1.0
    stim_spread: float = 0.0  # ps, Gaussian spread of the stimulated emission time
    p_multi: float = 0.0
    rep_period_ns: float = 12.5

    def __post_init__(self):
        for name in ("f_prep", "stim_success_prob", "p_multi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not (self.gamma_xx > 0 and self.gamma_x > 0 and self.rep_period_ns > 0):
            raise ValueError("rates and repetition period must be positive")
        if self.stim_spread < 0:
            raise ValueError("stim_spread must be non-negative")

    @property
    def rep_period(self) -> float:
        return 1e3 * self.rep_period_ns


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate: float = 0.0  # counts / s
    timing_jitter_sigma: float = 0.0  # ps

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.dark_rate < 0 or self.timing_jitter_sigma < 0:
            raise ValueError("dark_rate and jitter must be non-negative")


@dataclass
class Photons:
    """Flat photon list: absolute time (ps), circular polarisation (+1/-1), pulse index."""

    time: np.ndarray
    pol: np.ndarray
    pulse: np.ndarray

    def __len__(self):
        return len(self.time)


@dataclass
class EmissionRecord:
    """Per-pulse cascade record; ``t_xx``/``t_x`` are delays after the pulse (NaN if none)."""

    n_pulses: int
    rep_period: float
    prepared: np.ndarray
    pol: np.ndarray
    t_xx: np.ndarray
    t_x: np.ndarray
    extra: np.ndarray
    t_extra: np.ndarray
    pol_extra: np.ndarray
    first_pulse: int = 0

    @property
    def pulse_times(self) -> np.ndarray:
        return (self.first_pulse + np.arange(self.n_pulses)) * self.rep_period

    @property
    def span(self) -> tuple[float, float]:
        return self.first_pulse * self.rep_period, (self.first_pulse + self.n_pulses) * self.rep_period

    def xx_photons(self) -> Photons:
        k = np.nonzero(self.prepared)[0]
        return Photons(self.pulse_times[k] + self.t_xx[k], self.pol[k], k + self.first_pulse)

    def x_photons(self, include_extra: bool = True) -> Photons:
        k = np.nonzero(self.prepared)[0]
        t = self.pulse_times[k] + self.t_x[k]
        pol, idx = self.pol[k], k + self.first_pulse
        if include_extra:
            e = np.nonzero(self.extra)[0]
            t = np.concatenate([t, self.pulse_times[e] + self.t_extra[e]])
            pol = np.concatenate([pol, self.pol_extra[e]])
            idx = np.concatenate([idx, e + self.first_pulse])
        order = np.argsort(t, kind="stable")
        return Photons(t[order], pol[order], idx[order])


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _sample_block(model: EmissionModel, seed: int, block: int):
    rng = _block_rng(seed, block)
    n = BLOCK
    prepared = rng.random(n) < model.f_prep
    pol = np.where(rng.random(n) < 0.5, SIGMA_PLUS, SIGMA_MINUS)
    t_spont = rng.exponential(1.0 / model.gamma_xx, n)
    stim_ok = rng.random(n) < model.stim_success_prob
    stim_t = model.stim_delay + model.stim_spread * rng.standard_normal(n)
    t_xdecay = rng.exponential(1.0 / model.gamma_x, n)
    extra = rng.random(n) < model.p_multi
    t_extra = rng.exponential(1.0 / model.gamma_x, n)
    pol_extra = np.where(rng.random(n) < 0.5, SIGMA_PLUS, SIGMA_MINUS)
    t_xx = np.where(stim_ok, stim_t, t_spont) if model.stim_enabled else t_spont
    return prepared, pol, t_xx, t_xx + t_xdecay, extra, t_extra, pol_extra


def sample_emissions(model: EmissionModel, n_pulses: int, seed: int = 0,
                     first_pulse: int = 0) -> EmissionRecord:
    """Cascade photons for pulses ``first_pulse .. first_pulse + n_pulses - 1``."""
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    b0, b1 = first_pulse // BLOCK, (first_pulse + n_pulses - 1) // BLOCK
    parts = [_sample_block(model, seed, b) for b in range(b0, b1 + 1)]
    cols = [np.concatenate(c) for c in zip(*parts)]
    lo = first_pulse - b0 * BLOCK
    cols = [c[lo:lo + n_pulses] for c in cols]
    prepared, pol, t_xx, t_x, extra, t_extra, pol_extra = cols
    nan = np.where(prepared, 0.0, np.nan)
    return EmissionRecord(n_pulses, model.rep_period, prepared, pol, t_xx + nan, t_x + nan,
                          extra, np.where(extra, t_extra, np.nan), pol_extra, first_pulse)


def sample_poisson_photons(mean: float, n_pulses: int, gamma_x: float, seed: int = 0,
                           rep_period_ns: float = 12.5) -> Photons:
    """Coherent-state control: k ~ Poisson(mean) independent photons per pulse."""
    rng = np.random.default_rng([seed, 0xC0])
    k = rng.poisson(mean, n_pulses)
    idx = np.repeat(np.arange(n_pulses), k)
    t = idx * rep_period_ns * 1e3 + rng.exponential(1.0 / gamma_x, len(idx))
    pol = np.where(rng.random(len(idx)) < 0.5, SIGMA_PLUS, SIGMA_MINUS)
    order = np.argsort(t, kind="stable")
    return Photons(t[order], pol[order], idx[order])


@dataclass
class ClickStream:
    channel: int
    times: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) > 1 and np.any(np.diff(self.times) < 0):
            raise ValueError("click timestamps must be non-decreasing")

    def __len__(self):
        return len(self.times)


def detect(photons: Photons, det: DetectorModel, pol_filter: int | None = None, seed: int = 0,
           span: tuple[float, float] | None = None, channel: int = 0) -> ClickStream:
    """Thin by efficiency, filter circular polarisation, add jitter and dark counts."""
    rng = np.random.default_rng([seed, channel, 0xD7])
    keep = rng.random(len(photons)) < det.efficiency
    if pol_filter is not None:
        keep &= photons.pol == pol_filter
    t = photons.time[keep]
    if det.timing_jitter_sigma > 0:
        t = t + det.timing_jitter_sigma * rng.standard_normal(len(t))
    if det.dark_rate > 0:
        if span is None:
            span = (float(photons.time.min(initial=0.0)), float(photons.time.max(initial=0.0)))
        duration_s = (span[1] - span[0]) * 1e-12
        n_dark = rng.poisson(det.dark_rate * duration_s)
        t = np.concatenate([t, rng.uniform(span[0], span[1], n_dark)])
    return ClickStream(channel, np.sort(t, kind="stable"))


# -- histograms -------------------------------------------------------------------

@dataclass
class CorrelationHistogram:
    bin_width: float
    window: float
    counts: np.ndarray
    peak_window: float = 2000.0
    rep_period: float = 12500.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if np.any(self.counts < 0):
            raise ValueError("negative histogram counts")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(-self.window, self.window, len(self.counts) + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def n_side(self) -> int:
        """Largest |k| whose full integration window lies inside the histogram."""
        return int(math.floor((self.window - 0.5 * self.peak_window) / self.rep_period + 1e-9))

    def peak_area(self, k: int) -> float:
        c = self.bin_centers
        sel = np.abs(c - k * self.rep_period) < 0.5 * self.peak_window
        return float(self.counts[sel].sum())

    def side_peaks(self, ks=None) -> dict[int, float]:
        if ks is None:
            ks = [k for k in range(-self.n_side, self.n_side + 1) if k != 0]
        return {k: self.peak_area(k) for k in ks}


@dataclass(frozen=True)
class HistConfig:
    bin_width: float = 100.0
    window: float = 62500.0
    peak_window: float = 2000.0
    rep_period: float = 12500.0

    def __post_init__(self):
        ratio = self.window / self.rep_period
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("histogram window must be a multiple of the repetition period")
        nb = 2 * self.window / self.bin_width
        if abs(nb - round(nb)) > 1e-9:
            raise ValueError("window must be a multiple of the bin width")


def cross_correlate(start: ClickStream, stop: ClickStream, cfg: HistConfig = HistConfig(),
                    chunk: int = 1 << 18) -> CorrelationHistogram:
    """Histogram of t_stop - t_start for every pair with |delay| < window."""
    nb = int(round(2 * cfg.window / cfg.bin_width))
    counts = np.zeros(nb, dtype=np.int64)
    a, b = start.times, stop.times
    for s in range(0, len(a), chunk):
        ta = a[s:s + chunk]
        lo = np.searchsorted(b, ta - cfg.window, side="left")
        hi = np.searchsorted(b, ta + cfg.window, side="left")
        n = hi - lo
        tot = int(n.sum())
        if tot == 0:
            continue
        owner = np.repeat(np.arange(len(ta)), n)
        offs = np.arange(tot) - np.repeat(np.cumsum(n) - n, n)
        d = b[lo[owner] + offs] - ta[owner]
        idx = np.floor((d + cfg.window) / cfg.bin_width).astype(np.int64)
        ok = (idx >= 0) & (idx < nb)
        counts += np.bincount(idx[ok], minlength=nb)
    return CorrelationHistogram(cfg.bin_width, cfg.window, counts, cfg.peak_window, cfg.rep_period)


# -- estimators --------------------------------------------------------------------

@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    raw: float
    exceeds_one: bool


def fidelity_from_areas(a_side: float, a_center: float, c_pol: float = 2.0) -> float:
    if a_center <= 0:
        raise UndefinedFidelityError("center peak is empty; fidelity undefined")
    return a_side / a_center * c_pol


def fidelity_eq1(hist: CorrelationHistogram, c_pol: float = 2.0) -> FidelityEstimate:
    """Preparation fidelity from XX-start/X-stop peak areas."""
    side = hist.side_peaks()
    if len(side) < 3:
        raise StatisticsError(f"need >= 3 resolvable side peaks, have {len(side)}", len(side))
    raw = fidelity_from_areas(float(np.mean(list(side.values()))), hist.peak_area(0), c_pol)
    return FidelityEstimate(min(raw, 1.0), raw, raw > 1.0)


def split_stream(stream: ClickStream, seed: int = 0) -> tuple[ClickStream, ClickStream]:
    rng = np.random.default_rng([seed, 0x5B])
    m = rng.random(len(stream)) < 0.5
    return ClickStream(1, stream.times[m]), ClickStream(2, stream.times[~m])


@dataclass
class G2Result:
    histogram: CorrelationHistogram
    g2_zero: float
    side_mean: float


def hbt_g2(x_stream: ClickStream, cfg: HistConfig = HistConfig(), seed: int = 0,
           min_side_counts: float = 100.0) -> G2Result:
    a, b = split_stream(x_stream, seed)
    hist = cross_correlate(a, b, cfg)
    side = float(np.mean(list(hist.side_peaks().values())))
    if side < min_side_counts:
        raise StatisticsError(f"mean side peak has {side:.0f} counts (< {min_side_counts:.0f})", side)
    return G2Result(hist, hist.peak_area(0) / side, side)


def hom_visibility_from_areas(a_center: float, a_uncorrelated: float) -> float:
    if a_uncorrelated <= 0:
        raise UndefinedFidelityError("no uncorrelated coincidences")
    return 1.0 - 2.0 * a_center / a_uncorrelated


@dataclass
class HomResult:
    histogram: CorrelationHistogram
    visibility: float
    a_center: float
    a_uncorrelated: float


def mzi_outputs(rec: EmissionRecord, gamma_x: float, seed: int = 0,
                force_distinguishable: bool = False):
    """Route X photons through an unbalanced MZI whose delay equals the pulse period.

    Returns ``(times, port)`` of photons leaving the output coupler. A photon
    from pulse k on the long arm meets the pulse-(k+1) photon on the short arm;
    that pair leaves through different ports with probability (1 - s^2)/2,
    s^2 = exp(-gamma_x |t1 - t2|) for wavepackets starting at t1, t2.
    """
    rng = np.random.default_rng([seed, 0x40])
    n = rec.n_pulses
    has = rec.prepared.copy()
    long_arm = rng.random(n) < 0.5
    port = np.where(rng.random(n) < 0.5, 1, 2)
    meets = np.zeros(n, dtype=bool)
    meets[:-1] = has[:-1] & long_arm[:-1] & has[1:] & ~long_arm[1:]
    k = np.nonzero(meets)[0]
    if force_distinguishable:
        s2 = np.zeros(len(k))
    else:
        s2 = np.exp(-gamma_x * np.abs(rec.t_xx[k] - rec.t_xx[k + 1]))
    coincident = rng.random(len(k)) < 0.5 * (1.0 - s2)
    bunched_port = np.where(rng.random(len(k)) < 0.5, 1, 2)
    port[k] = np.where(coincident, 1, bunched_port)
    port[k + 1] = np.where(coincident, 2, bunched_port)
    idx = np.nonzero(has)[0]
    t = rec.pulse_times[idx] + rec.t_x[idx] + np.where(long_arm[idx], rec.rep_period, 0.0)
    p = port[idx]
    e = np.nonzero(rec.extra)[0]
    if len(e):
        te = rec.pulse_times[e] + rec.t_extra[e] + np.where(rng.random(len(e)) < 0.5, rec.rep_period, 0.0)
        t = np.concatenate([t, te])
        p = np.concatenate([p, np.where(rng.random(len(e)) < 0.5, 1, 2)])
    return t, p


def hom_visibility(model: EmissionModel, det: DetectorModel = DetectorModel(), n_pulses: int = 1_000_000,
                   seed: int = 0, cfg: HistConfig | None = None, force_distinguishable: bool = False,
                   min_side_counts: float = 100.0) -> HomResult:
    cfg = cfg or HistConfig(rep_period=model.rep_period, window=5 * model.rep_period)
    rec = sample_emissions(model, n_pulses, seed)
    t, port = mzi_outputs(rec, model.gamma_x, seed, force_distinguishable)
    streams = []
    for ch in (1, 2):
        sel = port == ch
        ph = Photons(t[sel], np.ones(sel.sum(), int), np.zeros(sel.sum(), int))
        streams.append(detect(ph, det, None, seed, rec.span, channel=ch))
    hist = cross_correlate(streams[0], streams[1], cfg)
    uncorr = [hist.peak_area(k) for k in (-3, -2, 2, 3)]
    a_unc = float(np.mean(uncorr))
    if a_unc < min_side_counts:
        raise StatisticsError(f"uncorrelated peaks hold {a_unc:.0f} counts (< {min_side_counts:.0f})", a_unc)
    a_c = hist.peak_area(0)
    return HomResult(hist, hom_visibility_from_areas(a_c, a_unc), a_c, a_unc)


# -- MZI phase scan for photon-number coherence --------------------------------------

@dataclass
class PncScan:
    phases: np.ndarray
    counts: np.ndarray  # (n_phase, n_per_phase, 2) ports 1 and 2
    v_est: float
    fit: tuple[float, float, float]


def fit_sinusoid(phases, y):
    """Least-squares y ~ a + b cos(phi) + c sin(phi); returns (a, b, c, residuals)."""
    phases = np.asarray(phases, float)
    A = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(y, float), rcond=None)
    resid = np.asarray(y, float) - A @ coef
    return coef, resid


def mzi_pnc_scan(v_true: float, mean_counts: float, phases, n_per_phase: int = 1,
                 seed: int = 0) -> PncScan:
    phases = np.asarray(phases, dtype=float)
    if len(phases) < 3 or np.ptp(phases) < 2 * np.pi - 1e-9:
        raise ValueError("phases must span at least 2 pi with >= 3 points")
    if not mean_counts > 0:
        raise ValueError("mean_counts must be positive")
    rng = np.random.default_rng([seed, 0x9C])
    lam1 = mean_counts * (1 + v_true * np.cos(phases)) / 2
    lam2 = mean_counts * (1 - v_true * np.cos(phases)) / 2
    c1 = rng.poisson(np.repeat(lam1[:, None], n_per_phase, 1))
    c2 = rng.poisson(np.repeat(lam2[:, None], n_per_phase, 1))
    y = c1.mean(axis=1)
    coef, resid = fit_sinusoid(phases, y)
    a, b, c = coef
    if not (np.all(np.isfinite(coef)) and a > 0):
        raise FitError(f"sinusoid fit failed: offset {a:.3g}", resid)
    amp = math.hypot(b, c)
    v = amp / a  # (max - min) / (max + min) of the fitted curve
    return PncScan(phases, np.stack([c1, c2], axis=-1), float(v), (float(a), float(b), float(c)))


# -- CSV ------------------------------------------------------------------------------

def write_clicks_csv(streams, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "t_ps"])
        for s in streams:
            for t in s.times:
                w.writerow([s.channel, repr(float(t))])


def read_clicks_csv(path) -> list[ClickStream]:
    chans: dict[int, list[float]] = {}
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))]
    if not rows or [c.strip() for c in rows[0]] != ["channel", "t_ps"]:
        raise ValueError("expected header 'channel,t_ps'")
    for ch, t in rows[1:]:
        chans.setdefault(int(ch), []).append(float(t))
    return [ClickStream(ch, np.sort(v)) for ch, v in sorted(chans.items())]


def write_histogram_csv(hist: CorrelationHistogram, path, comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(["bin_center_ps", "counts"])
        for c, n in zip(hist.bin_centers, hist.counts):
            w.writerow([repr(float(c)), int(n)])


def read_histogram_csv(path, peak_window=2000.0, rep_period=12500.0) -> CorrelationHistogram:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))]
    if not rows or [c.strip() for c in rows[0]] != ["bin_center_ps", "counts"]:
        raise ValueError("expected header 'bin_center_ps,counts'")
    centers = np.array([float(r[0]) for r in rows[1:]])
    counts = np.array([int(r[1]) for r in rows[1:]])
    bw = float(centers[1] - centers[0])
    window = float(centers[-1] + 0.5 * bw)
    return CorrelationHistogram(bw, window, counts, peak_window, rep_period)
