"""Laser pulse synthesis, 4f spectral shaping and chirping.

Envelopes are complex Rabi frequencies Omega(t) in rad/ps. The temporal and
spectral representations are a unitary DFT pair::

    A(w) = 1/sqrt(2 pi) * sum_k E(t_k) exp(-i w t_k) dt
    E(t) = 1/sqrt(2 pi) * sum_n A(w_n) exp(+i w_n t) dw

so that sum |E|^2 dt == sum |A|^2 dw exactly. A spectral component at positive
``w`` is a blue-shifted laser component relative to the carrier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

FOUR_LN2 = 4.0 * math.log(2.0)


class PulseError(ValueError):
    """Invalid pulse, grid or shaper input."""


def _frozen(arr, dtype=complex):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    dt: float
    n_samples: int

    def __post_init__(self):
        if not self.dt > 0:
            raise PulseError(f"dt must be positive, got {self.dt}")
        n = int(self.n_samples)
        if n < 2 or n & (n - 1):
            raise PulseError(f"n_samples must be a power of two >= 2, got {self.n_samples}")
        if not math.isfinite(self.t_start):
            raise PulseError("t_start must be finite")

    @classmethod
    def symmetric(cls, half_window: float = 150.0, n_samples: int = 4096) -> "TimeGrid":
        """Grid on [-half_window, half_window) with t = 0 at index n/2."""
        return cls(-half_window, 2.0 * half_window / n_samples, n_samples)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n_samples - 1) * self.dt

    @property
    def center(self) -> float:
        return self.t_start + (self.n_samples // 2) * self.dt

    @property
    def omegas(self) -> np.ndarray:
        """Angular-frequency axis (rad/ps) of the conjugate spectral grid."""
        dw = 2.0 * np.pi / (self.n_samples * self.dt)
        return dw * (np.arange(self.n_samples) - self.n_samples // 2)

    def refined(self, factor: int = 2) -> "TimeGrid":
        """Same window, ``factor`` times more samples."""
        return TimeGrid(self.t_start, self.dt / factor, self.n_samples * factor)


@dataclass(frozen=True)
class TemporalField:
    grid: TimeGrid
    envelope: np.ndarray
    carrier_offset: float = 0.0

    def __post_init__(self):
        env = _frozen(self.envelope)
        if env.shape != (self.grid.n_samples,):
            raise PulseError(
                f"envelope has {env.shape} samples, grid expects {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(env)):
            raise PulseError("envelope contains non-finite values")
        object.__setattr__(self, "envelope", env)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.envelope) ** 2) * self.grid.dt)

    def scaled(self, factor: float) -> "TemporalField":
        return TemporalField(self.grid, self.envelope * factor, self.carrier_offset)

    def with_carrier(self, carrier_offset: float) -> "TemporalField":
        return TemporalField(self.grid, self.envelope, carrier_offset)


@dataclass(frozen=True)
class SpectralField:
    omega: np.ndarray
    amplitude: np.ndarray
    carrier_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega", _frozen(self.omega, float))
        object.__setattr__(self, "amplitude", _frozen(self.amplitude))
        if self.omega.shape != self.amplitude.shape:
            raise PulseError("omega and amplitude must have the same shape")

    @property
    def energy(self) -> float:
        dw = self.omega[1] - self.omega[0]
        return float(np.sum(np.abs(self.amplitude) ** 2) * dw)


@dataclass(frozen=True)
class ShaperConfig:
    """4f shaper: slit of half-width ``slit_halfwidth`` blurred by a Gaussian spot."""

    center_detuning: float = 0.0
    slit_halfwidth: float = 0.5
    gaussian_smoothing_sigma: float = 0.22

    def __post_init__(self):
        if not self.slit_halfwidth > 0:
            raise PulseError("slit_halfwidth must be positive")
        if not self.gaussian_smoothing_sigma >= 0:
            raise PulseError("gaussian_smoothing_sigma must be non-negative")

    def transmission(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=float) - self.center_detuning
        hw, sigma = self.slit_halfwidth, self.gaussian_smoothing_sigma
        if sigma == 0:
            return np.where(np.abs(w) <= hw, 1.0, 0.0)
        s = math.sqrt(2.0) * sigma
        return 0.5 * (erf((w + hw) / s) - erf((w - hw) / s))


@dataclass(frozen=True)
class ChirpSpec:
    gdd: float = 45.0  # ps^2
    omega_ref: float = 0.0  # rad/ps, relative to the spectral carrier

    def __post_init__(self):
        if not math.isfinite(self.gdd):
            raise PulseError("gdd must be finite")


@dataclass(frozen=True)
class PulseMetrics:
    area: float
    fwhm: float | None
    peak_time: float


def gaussian_peak(fwhm: float, area: float) -> float:
    """Peak Rabi frequency of a Gaussian with intensity FWHM ``fwhm`` and pulse area ``area``."""
    return area / (fwhm * math.sqrt(math.pi / (2.0 * math.log(2.0))))


def make_gaussian(fwhm: float, area: float, carrier_offset: float = 0.0,
                  grid: TimeGrid | None = None, t_peak: float | None = None) -> TemporalField:
    """Transform-limited Gaussian whose *intensity* FWHM is ``fwhm``.

    Omega(t) = Omega0 exp(-2 ln2 t^2 / fwhm^2), Omega0 chosen so sum |Omega| dt = area.
    """
    if not fwhm > 0:
        raise PulseError(f"fwhm must be positive, got {fwhm}")
    if area < 0:
        raise PulseError(f"area must be non-negative, got {area}")
    grid = grid or TimeGrid.symmetric()
    t0 = grid.center if t_peak is None else t_peak
    if t0 - 5 * fwhm < grid.t_start or t0 + 5 * fwhm > grid.t_end:
        raise PulseError(f"grid [{grid.t_start}, {grid.t_end}] too small for a {fwhm} ps pulse")
    t = grid.times
    unit = gaussian_peak(fwhm, 1.0) * np.exp(-0.5 * FOUR_LN2 * (t - t0) ** 2 / fwhm**2)
    numeric = np.sum(unit) * grid.dt
    if abs(numeric - 1.0) > 1e-6:
        raise PulseError(f"grid too coarse or small: relative area error {numeric - 1.0:.2e}")
    env = area * unit
    return TemporalField(grid, env.astype(complex), carrier_offset)


def to_spectrum(fld: TemporalField) -> SpectralField:
    g = fld.grid
    w = g.omegas
    amp = np.fft.fftshift(np.fft.fft(fld.envelope))
    amp = amp * np.exp(-1j * w * g.t_start) * g.dt / math.sqrt(2.0 * math.pi)
    return SpectralField(w, amp, fld.carrier_offset)


def to_time(spec: SpectralField, grid: TimeGrid) -> TemporalField:
    w = grid.omegas
    if spec.omega.shape != w.shape or not np.allclose(spec.omega, w, rtol=0, atol=1e-12):
        raise PulseError("spectral axis does not match the target time grid")
    a = spec.amplitude * np.exp(1j * w * grid.t_start)
    env = np.fft.ifft(np.fft.ifftshift(a)) * math.sqrt(2.0 * math.pi) / grid.dt
    return TemporalField(grid, env, spec.carrier_offset)


def apply_shaper(spec: SpectralField, cfg: ShaperConfig) -> SpectralField:
    f = cfg.transmission(spec.omega + spec.carrier_offset)
    return SpectralField(spec.omega, spec.amplitude * f, spec.carrier_offset)


def apply_chirp(spec: SpectralField, chirp: ChirpSpec) -> SpectralField:
    phase = 0.5 * chirp.gdd * (spec.omega - chirp.omega_ref) ** 2
    return SpectralField(spec.omega, spec.amplitude * np.exp(1j * phase), spec.carrier_offset)


def _crossing(times, y, lo, level):
    """Root of y - level between samples lo and lo+1.

    Linear interpolation seeds the answer; a cubic through the four nearest
    samples refines it (linear alone is O(dt^2) and too grid-sensitive).
    """
    t0, t1 = times[lo], times[lo + 1]
    y0, y1 = y[lo] - level, y[lo + 1] - level
    lin = t0 - y0 * (t1 - t0) / (y1 - y0)
    a = max(0, min(lo - 1, len(y) - 4))
    tt, yy = times[a:a + 4], y[a:a + 4] - level
    if len(tt) < 4:
        return lin
    coef = np.polyfit(tt - t0, yy, 3)
    if y0 == 0:
        return t0
    if np.polyval(coef, 0.0) * np.polyval(coef, t1 - t0) > 0:
        return lin
    return t0 + brentq(lambda s: np.polyval(coef, s), 0.0, t1 - t0, xtol=1e-14)


def intensity_fwhm(times: np.ndarray, intensity: np.ndarray) -> float | None:
    """Full width at half maximum, outermost half-level crossings."""
    peak = intensity.max(initial=0.0)
    if peak <= 0:
        return None
    half = 0.5 * peak
    above = np.nonzero(intensity >= half)[0]
    i, j = above[0], above[-1]
    if i == 0 or j == len(intensity) - 1:
        return None
    left = _crossing(times, intensity, i - 1, half)
    right = _crossing(times, intensity, j, half)
    return float(right - left)


def half_max_edges(fld: TemporalField) -> tuple[float, float] | None:
    """Leading and trailing times where |Omega|^2 crosses half its peak."""
    mag = np.abs(fld.envelope)
    top = mag.max(initial=0.0)
    if top <= 0:
        return None
    inten = (mag / top) ** 2  # normalised first so weak pulses do not underflow
    peak = 1.0
    above = np.nonzero(inten >= 0.5 * peak)[0]
    i, j = above[0], above[-1]
    t = fld.times
    lead = t[0] if i == 0 else _crossing(t, inten, i - 1, 0.5 * peak)
    trail = t[-1] if j == len(t) - 1 else _crossing(t, inten, j, 0.5 * peak)
    return float(lead), float(trail)


def pulse_metrics(fld: TemporalField) -> PulseMetrics:
    mag = np.abs(fld.envelope)
    area = float(np.sum(mag) * fld.grid.dt)
    if area == 0:
        return PulseMetrics(0.0, None, float(fld.grid.center))
    t = fld.times
    return PulseMetrics(area, intensity_fwhm(t, (mag / mag.max()) ** 2), float(t[np.argmax(mag)]))


def shape_pulse(fld: TemporalField, shaper: ShaperConfig | None = None,
                chirp: ChirpSpec | None = None) -> TemporalField:
    """Full pipeline: spectrum, slit filter, quadratic phase, back to time."""
    spec = to_spectrum(fld)
    if shaper is not None:
        spec = apply_shaper(spec, shaper)
    if chirp is not None and chirp.gdd != 0:
        spec = apply_chirp(spec, chirp)
    return to_time(spec, fld.grid)


def solve_slit_halfwidth(target_fwhm: float = 6.0, input_fwhm: float = 2.0,
                         sigma: float = 0.22, grid: TimeGrid | None = None) -> float:
    """Slit half-width (rad/ps) that turns a centred ``input_fwhm`` Gaussian into ``target_fwhm``."""
    return _solve_slit(target_fwhm, input_fwhm, sigma, grid or TimeGrid.symmetric())


@lru_cache(maxsize=32)
def _solve_slit(target_fwhm, input_fwhm, sigma, grid):
    src = make_gaussian(input_fwhm, 1.0, grid=grid)

    def mismatch(hw):
        out = shape_pulse(src, ShaperConfig(0.0, hw, sigma))
        return pulse_metrics(out).fwhm - target_fwhm

    # narrow slits give long pulses, wide slits recover the input duration
    return brentq(mismatch, 0.05, 5.0, xtol=1e-10)


def default_shaper(center_detuning: float = 0.0, grid: TimeGrid | None = None,
                   sigma: float = 0.22) -> ShaperConfig:
    hw = solve_slit_halfwidth(6.0, 2.0, sigma, grid)
    return ShaperConfig(center_detuning, hw, sigma)


@dataclass(frozen=True)
class SlpRecipe:
    """Recipe for the shaped TPE pulse: Gaussian source, slit, chirp.

    ``input_area`` scales the source Gaussian; the power of the shaped pulse
    is proportional to ``input_area**2``.
    """

    input_fwhm: float = 2.0
    input_carrier: float = 0.0
    shaper: ShaperConfig | None = None
    gdd: float = 0.0
    grid: TimeGrid = field(default_factory=TimeGrid.symmetric)

    def build(self, input_area: float = 1.0) -> TemporalField:
        src = make_gaussian(self.input_fwhm, 1.0, self.input_carrier, self.grid)
        out = shape_pulse(src, self.shaper, ChirpSpec(self.gdd) if self.gdd else None)
        return out.scaled(input_area)


# -- CSV interchange ---------------------------------------------------------

def write_temporal_csv(fld: TemporalField, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# carrier_offset_radps={fld.carrier_offset!r}\n")
        w = csv.writer(fh)
        w.writerow(["t_ps", "re_omega", "im_omega"])
        for t, e in zip(fld.times, fld.envelope):
            w.writerow([repr(float(t)), repr(float(e.real)), repr(float(e.imag))])


def write_spectral_csv(spec: SpectralField, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# carrier_offset_radps={spec.carrier_offset!r}\n")
        w = csv.writer(fh)
        w.writerow(["w_radps", "re_amp", "im_amp"])
        for om, a in zip(spec.omega, spec.amplitude):
            w.writerow([repr(float(om)), repr(float(a.real)), repr(float(a.imag))])


def _read_three_columns(path, header):
    carrier = 0.0
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition("=")
            if key.strip() == "carrier_offset_radps":
                carrier = float(val)
        else:
            body.append(ln)
    reader = csv.reader(body)
    first = next(reader, None)
    if first is None or [c.strip() for c in first] != header:
        raise PulseError(f"{Path(path).name}: expected header {header}, got {first}")
    for row in reader:
        if row:
            rows.append([float(c) for c in row])
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    return arr, carrier


def read_temporal_csv(path) -> TemporalField:
    arr, carrier = _read_three_columns(path, ["t_ps", "re_omega", "im_omega"])
    t = arr[:, 0]
    if len(t) < 2:
        raise PulseError("need at least two samples")
    dt = float(np.mean(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise PulseError("time samples are not uniformly spaced")
    return TemporalField(TimeGrid(float(t[0]), dt, len(t)), arr[:, 1] + 1j * arr[:, 2], carrier)


def read_spectral_csv(path) -> SpectralField:
    arr, carrier = _read_three_columns(path, ["w_radps", "re_amp", "im_amp"])
    return SpectralField(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], carrier)
