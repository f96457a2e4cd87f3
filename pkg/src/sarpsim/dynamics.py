"""Four-level quantum-dot ladder (g, X_H, X_V, XX) under TPE and stimulation pulses.

The frame rotates at half the biexciton energy, so the Hamiltonian diagonal is
``(0, d, d, 0)`` with ``d = E_B / (2 hbar)``. The TPE pulse (H-polarised)
couples g <-> X_H <-> XX; the stimulation pulse couples XX -> X_pol only.

Most entry points take a *list* of drive sets and integrate them together as
one batch; single-point helpers wrap the batched ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .constants import mev_to_radps
from .integrate import IntegrationError, dopri5
from .pulse import (SlpRecipe, TemporalField, TimeGrid, default_shaper, half_max_edges,
                    make_gaussian, pulse_metrics)

G, XH, XV, XX = 0, 1, 2, 3
STATE_INDEX = {"g": G, "xh": XH, "xv": XV, "xx": XX}
POL_INDEX = {"H": XH, "V": XV}

# numerical zero for drive supports, relative to the batch peak amplitude
SUPPORT_THRESHOLD = 1e-7


class DynamicsError(ValueError):
    """Invalid dynamics input (grids, drives, states)."""


@dataclass(frozen=True)
class QdParams:
    binding_energy_mev: float = 4.0
    gamma_xx: float = 1.0 / 120.0  # 1/ps
    gamma_x: float = 1.0 / 250.0  # 1/ps
    x_wavelength_nm: float = 795.0

    def __post_init__(self):
        if not (self.binding_energy_mev > 0 and self.gamma_xx > 0 and self.gamma_x > 0):
            raise DynamicsError("binding energy and decay rates must be positive")

    @property
    def delta(self) -> float:
        """Exciton level in the rotating frame, rad/ps."""
        return mev_to_radps(self.binding_energy_mev) / 2.0


ANCHORS = ("trailing_edge", "peak")


@dataclass(frozen=True)
class Stim:
    """Stimulation pulse; ``field.carrier_offset`` is the detuning from XX -> X.

    The stim peak is placed ``delay`` ps after the TPE pulse's trailing
    half-maximum (``anchor="trailing_edge"``) or after its intensity peak
    (``anchor="peak"``).
    """

    field: TemporalField
    polarization: str = "H"
    delay: float = 7.0
    anchor: str = "trailing_edge"

    def __post_init__(self):
        if self.polarization not in POL_INDEX:
            raise DynamicsError(f"polarization must be 'H' or 'V', got {self.polarization!r}")
        if self.anchor not in ANCHORS:
            raise DynamicsError(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")


@dataclass(frozen=True)
class DriveSet:
    tpe: TemporalField | None = None
    stim: Stim | None = None

    def without_stim(self) -> "DriveSet":
        return DriveSet(self.tpe, None)


def default_stim(area: float = math.pi, fwhm: float = 2.0, polarization: str = "H",
                 delay: float = 7.0, detuning: float = 0.0, anchor: str = "trailing_edge",
                 grid: TimeGrid | None = None) -> Stim:
    """Transform-limited Gaussian stim pulse, resonant with XX -> X by default."""
    return Stim(make_gaussian(fwhm, area, detuning, grid or TimeGrid.symmetric(32.0, 1024)),
                polarization, delay, anchor)


@dataclass(frozen=True)
class SimOptions:
    grid: TimeGrid = field(default_factory=TimeGrid.symmetric)
    decay_enabled: bool = False
    integrator_tol: float = 1e-8
    store_trajectory: bool = False

    @classmethod
    def with_decay(cls, params: QdParams, t_start: float = -150.0, **kw) -> "SimOptions":
        """Window long enough for the full radiative cascade after the drives."""
        tail = 8.0 / min(params.gamma_x, params.gamma_xx) + 300.0
        n = 1 << int(math.ceil(math.log2((tail - t_start) / 0.5)))
        return cls(TimeGrid(t_start, 0.5, n), decay_enabled=True, **kw)


@dataclass
class EvolveResult:
    rho: np.ndarray  # (batch, 4, 4) final state
    emitted: np.ndarray  # (batch, 2) gamma_x * int rho_{X_H}, rho_{X_V} dt
    times: np.ndarray | None = None
    trajectory: np.ndarray | None = None  # (n_t, batch, 4, 4)
    drive_window: tuple[float, float] | None = None


def ket_dm(name: str) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    i = STATE_INDEX[name]
    rho[i, i] = 1.0
    return rho


def validate_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-9) -> None:
    rho = np.asarray(rho)
    if rho.shape[-2:] != (4, 4):
        raise DynamicsError(f"density matrix must be 4x4, got {rho.shape}")
    if np.max(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2)))) > herm_tol:
        raise DynamicsError("density matrix is not Hermitian")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.max(np.abs(tr - 1.0)) > trace_tol:
        raise DynamicsError(f"trace deviates from 1: {tr}")
    ev = np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2))))
    if np.min(ev) < -eig_tol:
        raise DynamicsError(f"negative eigenvalue {np.min(ev):.3g}")


# -- drive sampling ------------------------------------------------------------

def _upsample(env: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited (zero-padded FFT) resampling along axis 0."""
    if factor == 1:
        return env
    n = env.shape[0]
    spec = np.fft.fftshift(np.fft.fft(env, axis=0), axes=0)
    pad = (factor - 1) * n
    padded = np.concatenate(
        [np.zeros((pad // 2,) + env.shape[1:], complex), spec,
         np.zeros((pad - pad // 2,) + env.shape[1:], complex)], axis=0)
    return np.fft.ifft(np.fft.ifftshift(padded, axes=0), axis=0) * factor


class _Channel:
    """Batched cubic interpolant of complex envelopes sharing one grid.

    Member ``b`` is evaluated at ``t - shift[b]`` and multiplied by the exact
    carrier ``exp(i * carrier[b] * t)``; it vanishes outside its grid.
    """

    def __init__(self, grid: TimeGrid, env: np.ndarray, shift, carrier, upsample=2):
        self.shift = np.asarray(shift, float)
        self.carrier = np.asarray(carrier, float)
        self.cols = np.arange(env.shape[1])
        tt = grid.times
        self.extent = (tt[0] + self.shift.min(), tt[-1] + self.shift.max())
        peak = np.max(np.abs(env))
        mask = np.abs(env) > SUPPORT_THRESHOLD * peak if peak > 0 else np.zeros(env.shape, bool)
        rows = np.nonzero(mask.any(axis=1))[0]
        fine = _upsample(env, upsample)
        self.h = grid.dt / upsample
        if len(rows):
            self.support = (tt[rows[0]] + self.shift.min(), tt[rows[-1]] + self.shift.max())
            # keep only the populated stretch (plus margin) in the spline
            lo = max(0, (rows[0] - 4) * upsample)
            hi = min(fine.shape[0], (rows[-1] + 5) * upsample)
        else:
            self.support = None
            lo, hi = 0, 2
        fine = fine[lo:hi]
        self.t0 = tt[0] + lo * self.h
        self.n = fine.shape[0]
        t = self.t0 + self.h * np.arange(self.n)
        self.coef = CubicSpline(t, fine, axis=0, bc_type="natural").c  # (4, n-1, B)

    def __call__(self, t: float) -> np.ndarray:
        s = t - self.shift - self.t0
        idx = np.floor(s / self.h).astype(int)
        inside = (idx >= 0) & (idx < self.n - 1)
        idx = np.clip(idx, 0, self.n - 2)
        x = s - idx * self.h
        c = self.coef[:, idx, self.cols]
        val = ((c[0] * x + c[1]) * x + c[2]) * x + c[3]
        return np.where(inside, val, 0.0) * np.exp(1j * self.carrier * t)


def _same_grid(fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise DynamicsError("all fields in a batch must share one time grid")
    return g


class _BatchDrive:
    def __init__(self, params: QdParams, drives: list[DriveSet]):
        self.batch = len(drives)
        self.tpe = None
        self.stim = None
        tpe_peaks = np.zeros(self.batch)
        tpe_trail = np.zeros(self.batch)
        tpes = [d.tpe for d in drives]
        if any(f is not None for f in tpes):
            ref = next(f for f in tpes if f is not None)
            tpes = [f if f is not None else ref.scaled(0.0) for f in tpes]
            grid = _same_grid(tpes)
            env = np.stack([f.envelope for f in tpes], axis=1)
            self.tpe = _Channel(grid, env, np.zeros(self.batch), [f.carrier_offset for f in tpes])
            tpe_peaks = np.array([pulse_metrics(f).peak_time for f in tpes])
            edges = [half_max_edges(f) for f in tpes]
            tpe_trail = np.array([e[1] if e else p for e, p in zip(edges, tpe_peaks)])
        stims = [d.stim for d in drives]
        if any(s is not None for s in stims):
            ref = next(s for s in stims if s is not None)
            stims = [s if s is not None else Stim(ref.field.scaled(0.0), ref.polarization, ref.delay)
                     for s in stims]
            grid = _same_grid([s.field for s in stims])
            env = np.stack([s.field.envelope for s in stims], axis=1)
            ref_t = {"peak": tpe_peaks, "trailing_edge": tpe_trail}
            shift = np.array([ref_t[s.anchor][b] + s.delay - pulse_metrics(s.field).peak_time
                              for b, s in enumerate(stims)])
            carrier = np.array([s.field.carrier_offset - params.delta for s in stims])
            self.stim = _Channel(grid, env, shift, carrier)
            self.stim_pol = np.array([POL_INDEX[s.polarization] for s in stims])

    @property
    def support(self):
        spans = [c.support for c in (self.tpe, self.stim) if c is not None and c.support]
        if not spans:
            return None
        return min(s[0] for s in spans), max(s[1] for s in spans)

    def hamiltonian(self, t: float, params: QdParams) -> np.ndarray:
        H = np.zeros((self.batch, 4, 4), dtype=complex)
        H[:, XH, XH] = H[:, XV, XV] = params.delta
        if self.tpe is not None:
            c = 0.5 * self.tpe(t)
            H[:, G, XH] = c
            H[:, XH, XX] = c
        if self.stim is not None:
            c = 0.5 * self.stim(t)
            b = np.arange(self.batch)
            H[b, self.stim_pol, XX] += c
        H += np.conj(np.swapaxes(np.triu(H, 1), -1, -2))
        return H


def build_hamiltonian(t: float, params: QdParams, drives: DriveSet) -> np.ndarray:
    """4x4 Hermitian Hamiltonian (rad/ps) at time ``t`` in the rotating frame."""
    bd = _BatchDrive(params, [drives])
    for ch in (bd.tpe, bd.stim):
        if ch is not None and not (ch.extent[0] <= t <= ch.extent[1]):
            raise DynamicsError(f"t={t} lies outside the drive grid {ch.extent}")
    return bd.hamiltonian(t, params)[0]


# -- master equation -------------------------------------------------------------

def _decay_rates(params: QdParams):
    # diag of sum_k L_k^dag L_k
    return np.array([0.0, params.gamma_x, params.gamma_x, params.gamma_xx])


def _make_rhs(params: QdParams, bd: _BatchDrive | None, decay: bool):
    gam = _decay_rates(params)
    half_sum = 0.5 * (gam[:, None] + gam[None, :])
    gx, gxx = params.gamma_x, params.gamma_xx
    B = bd.batch if bd is not None else None

    def rhs(t, y):
        n = y.shape[0]
        rho = y[:, :16].reshape(n, 4, 4)
        if bd is not None:
            H = bd.hamiltonian(t, params)
        else:
            H = np.zeros((n, 4, 4), complex)
            H[:, XH, XH] = H[:, XV, XV] = params.delta
        d = -1j * (H @ rho - rho @ H)
        dy = np.zeros_like(y)
        if decay:
            d -= half_sum * rho
            d[:, XH, XH] += 0.5 * gxx * rho[:, XX, XX]
            d[:, XV, XV] += 0.5 * gxx * rho[:, XX, XX]
            d[:, G, G] += gx * (rho[:, XH, XH] + rho[:, XV, XV])
            dy[:, 16] = gx * rho[:, XH, XH]
            dy[:, 17] = gx * rho[:, XV, XV]
        dy[:, :16] = d.reshape(n, 16)
        return dy

    rhs.batch = B
    return rhs


@lru_cache(maxsize=16)
def _free_generator(params: QdParams, decay: bool) -> np.ndarray:
    rhs = _make_rhs(params, None, decay)
    eye = np.eye(18, dtype=complex)
    return rhs(0.0, eye).T  # column j is the image of basis vector j


def _free_propagate(y, params, decay, t0, t1, t_eval=None):
    """Exact evolution with no drive: y(t) = expm(G (t - t0)) y(t0)."""
    gen = _free_generator(params, decay)
    out = None
    if t_eval is not None and len(t_eval):
        out = np.empty((len(t_eval),) + y.shape, complex)
        # uniform stored times: reuse one propagator
        steps = np.diff(np.concatenate([[t0], t_eval]))
        cur = y
        cache = {}
        for i, dt in enumerate(steps):
            key = round(dt, 12)
            if key not in cache:
                cache[key] = expm(gen * dt)
            cur = cur @ cache[key].T
            out[i] = cur
        y = cur
        t0 = t_eval[-1]
    if t1 > t0:
        y = y @ expm(gen * (t1 - t0)).T
    return y, out


def evolve_batch(rho0, params: QdParams, drives: list[DriveSet],
                 options: SimOptions | None = None) -> EvolveResult:
    """Integrate the master equation for every drive set in ``drives``.

    ``rho0`` is one 4x4 state shared by all members, or an array (batch, 4, 4).
    """
    options = options or SimOptions()
    rho0 = np.asarray(rho0, dtype=complex)
    validate_density_matrix(rho0)
    B = len(drives)
    if B == 0:
        return EvolveResult(np.zeros((0, 4, 4), complex), np.zeros((0, 2)))
    if rho0.ndim == 2:
        rho0 = np.broadcast_to(rho0, (B, 4, 4))
    y = np.zeros((B, 18), dtype=complex)
    y[:, :16] = rho0.reshape(B, 16)

    grid = options.grid
    t_start, t_end = grid.t_start, grid.t_end
    bd = _BatchDrive(params, drives)
    support = bd.support
    if support is not None:
        if support[0] < t_start or support[1] > t_end:
            raise DynamicsError(
                f"drive support [{support[0]:.3f}, {support[1]:.3f}] ps exceeds the simulation window "
                f"[{t_start:.3f}, {t_end:.3f}] ps")
        if options.decay_enabled:
            tail = t_end - support[1]
            if tail < 8.0 / params.gamma_x:
                raise DynamicsError(
                    f"decay needs >= {8.0 / params.gamma_x:.1f} ps after the drives, window leaves {tail:.1f}")

    times = grid.times if options.store_trajectory else None
    traj = None if times is None else np.empty((len(times), B, 18), complex)
    decay = options.decay_enabled
    # per-step control one decade below the requested tolerance keeps the
    # accumulated drift of trace and purity inside it over long chirped drives
    tol = 0.1 * options.integrator_tol

    # free (exact) / driven (adaptive) / free segments
    if support is None:
        segments = [(t_start, t_end, False)]
    else:
        segments = [(t_start, support[0], False), (support[0], support[1], True),
                    (support[1], t_end, False)]
    for k, (a, b, driven) in enumerate(segments):
        ts = sel = None
        if times is not None:
            lo = times >= a if k == 0 else times > a
            sel = np.nonzero(lo & (times <= b))[0]
            ts = times[sel]
        if driven:
            y, out = dopri5(_make_rhs(params, bd, decay), a, b, y, rtol=tol, atol=1e-2 * tol,
                            t_eval=ts)
        else:
            y, out = _free_propagate(y, params, decay, a, b, ts)
        if out is not None:
            traj[sel] = out

    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state after integration")
    rho = y[:, :16].reshape(B, 4, 4)
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    res = EvolveResult(rho, y[:, 16:].real.copy(), drive_window=support)
    if traj is not None:
        res.times = times
        r = traj[:, :, :16].reshape(len(times), B, 4, 4)
        res.trajectory = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
    return res


def evolve(rho0, params: QdParams, drives: DriveSet, options: SimOptions | None = None):
    """Single-system wrapper around :func:`evolve_batch`.

    Returns ``(rho_final, result)``; ``result.trajectory`` has shape (n_t, 4, 4)
    when requested.
    """
    res = evolve_batch(rho0, params, [drives], options)
    if res.trajectory is not None:
        res.trajectory = res.trajectory[:, 0]
    return res.rho[0], res


# -- observables -----------------------------------------------------------------

def pnc_visibility(rho, transition=("xx", "g")) -> float:
    """|rho_{lower,upper}|^2 / rho_{upper,upper}; 0 when the upper level is empty."""
    upper, lower = (STATE_INDEX[s] if isinstance(s, str) else s for s in transition)
    rho = np.asarray(rho)
    pu = rho[..., upper, upper].real
    coh = np.abs(rho[..., lower, upper]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(pu > 1e-12, coh / np.where(pu > 1e-12, pu, 1.0), 0.0)
    v = np.clip(v, 0.0, 1.0)
    return float(v) if v.ndim == 0 else v


def _collection_index(pol):
    return POL_INDEX[pol]


def counts_from_state(rho, stim_pols, collection_pol="H"):
    """Decay-off expected X counts: rho_{X_pol} + rho_XX / 2."""
    rho = np.asarray(rho)
    i = _collection_index(collection_pol)
    return rho[..., i, i].real + 0.5 * rho[..., XX, XX].real


def x_counts_batch(params: QdParams, drives: list[DriveSet], options: SimOptions | None = None,
                   collection_pol: str = "H") -> np.ndarray:
    options = options or SimOptions()
    res = evolve_batch(ket_dm("g"), params, drives, replace(options, store_trajectory=False))
    if options.decay_enabled:
        return res.emitted[:, _collection_index(collection_pol) - 1].copy()
    return counts_from_state(res.rho, None, collection_pol)


def x_counts(params: QdParams, drives: DriveSet, options: SimOptions | None = None,
             collection_pol: str = "H") -> float:
    """Expected collected X photons per pulse."""
    return float(x_counts_batch(params, [drives], options, collection_pol)[0])


def prep_fidelity_batch(params: QdParams, drives: list[DriveSet],
                        options: SimOptions | None = None) -> np.ndarray:
    options = options or SimOptions()
    if options.decay_enabled:
        raise DynamicsError("preparation fidelity is defined with decay disabled")
    res = evolve_batch(ket_dm("g"), params, [d.without_stim() for d in drives], options)
    return np.clip(res.rho[:, XX, XX].real, 0.0, 1.0)


def prep_fidelity(params: QdParams, drives: DriveSet, options: SimOptions | None = None) -> float:
    """Biexciton population right after the TPE pulse (stimulation ignored)."""
    return float(prep_fidelity_batch(params, [drives], options)[0])


# -- power calibration -----------------------------------------------------------

def default_recipe(gdd: float = 0.0, slit_center: float = 0.0,
                   grid: TimeGrid | None = None) -> SlpRecipe:
    grid = grid or TimeGrid.symmetric()
    return SlpRecipe(2.0, 0.0, default_shaper(slit_center, grid), gdd, grid)


@dataclass(frozen=True)
class PiCalibration:
    """``p_pi`` is the squared input-pulse area that maximises the first XX lobe."""

    p_pi: float
    rho_xx: float

    def input_area(self, power_in_pi: float) -> float:
        return math.sqrt(max(power_in_pi, 0.0) * self.p_pi)


def _xx_vs_power(params, recipe, powers, options):
    base = recipe.build(1.0)
    drives = [DriveSet(base.scaled(math.sqrt(p))) for p in powers]
    return prep_fidelity_batch(params, drives, options)


@lru_cache(maxsize=32)
def calibrate_pi_power(params: QdParams, recipe: SlpRecipe | None = None,
                       options: SimOptions | None = None, p_max: float | None = None,
                       n_scan: int = 41) -> PiCalibration:
    """Locate the first maximum of rho_XX against pulse power (squared input area).

    A coarse batched scan brackets the lobe; golden-section search refines it.
    """
    recipe = recipe or default_recipe()
    options = options or SimOptions()
    if recipe.gdd != 0:
        raise DynamicsError("calibrate with an unchirped template")
    if p_max is None:
        # two-photon pi condition ~ int Omega^2 dt / (2 d) = pi, padded generously
        unit = recipe.build(1.0)
        p_max = 4.0 * (2.0 * math.pi * params.delta) / unit.energy
    powers = np.linspace(0.0, p_max, n_scan)
    xx = _xx_vs_power(params, recipe, powers, options)
    interior = [i for i in range(1, n_scan - 1) if xx[i] >= xx[i - 1] and xx[i] > xx[i + 1]]
    if not interior:
        raise DynamicsError("no interior maximum of rho_XX in the power scan")
    i = interior[0]
    lo, hi = powers[i - 1], powers[i + 1]
    res = minimize_scalar(lambda p: -_xx_vs_power(params, recipe, [p], options)[0],
                          bracket=(lo, powers[i], hi), method="golden",
                          options={"xtol": 1e-6})
    return PiCalibration(float(res.x), float(-res.fun))


def tpe_drive(cal: PiCalibration, power_in_pi: float, recipe: SlpRecipe) -> TemporalField:
    return recipe.build(cal.input_area(power_in_pi))


# -- traces and export -------------------------------------------------------------

def observables_batch(params: QdParams, tpe_fields: list[TemporalField], stim: Stim | None = None,
                      options: SimOptions | None = None, collection_pol: str = "H",
                      with_fidelity: bool = True):
    """``(f_prep, x_counts, visibility)`` arrays for a batch of TPE pulses.

    The visibility is the XX-g coherence without stimulation (or with decay on)
    and the X_pol-g coherence right after a stim pulse. ``f_prep`` is NaN when
    ``with_fidelity`` is false and a separate stim-free run would be needed.
    """
    options = replace(options or SimOptions(), store_trajectory=False)
    plain_opts = replace(options, decay_enabled=False, grid=SimOptions().grid) \
        if options.decay_enabled else options
    n = len(tpe_fields)
    res0 = None
    if with_fidelity or stim is None or options.decay_enabled:
        res0 = evolve_batch(ket_dm("g"), params, [DriveSet(f) for f in tpe_fields], plain_opts)
    f_prep = np.clip(res0.rho[:, XX, XX].real, 0.0, 1.0) if res0 is not None else np.full(n, np.nan)
    if stim is None and not options.decay_enabled:
        return f_prep, counts_from_state(res0.rho, None, collection_pol), \
            np.atleast_1d(pnc_visibility(res0.rho))
    res = evolve_batch(ket_dm("g"), params, [DriveSet(f, stim) for f in tpe_fields], options)
    if options.decay_enabled:
        counts = res.emitted[:, _collection_index(collection_pol) - 1].real.copy()
        vis = pnc_visibility(res0.rho)
    else:
        counts = counts_from_state(res.rho, None, collection_pol)
        vis = pnc_visibility(res.rho, (POL_INDEX[stim.polarization], G))
    return f_prep, counts, np.atleast_1d(vis)


def rabi_trace(params: QdParams, template: SlpRecipe, powers, gdd: float = 0.0,
               stim: Stim | None = None, options: SimOptions | None = None,
               collection_pol: str = "H", cal: PiCalibration | None = None):
    """``[(power, x_counts, F_p, V), ...]`` for powers in units of the pi power.

    The pi power is calibrated on the unchirped ``template``; ``gdd`` is then
    applied to every pulse.
    """
    powers = [float(p) for p in powers]
    if not powers:
        return []
    if any(p < 0 for p in powers):
        raise DynamicsError("powers must be non-negative")
    template = replace(template, gdd=0.0)
    cal = cal or calibrate_pi_power(params, template)
    recipe = replace(template, gdd=gdd)
    fields = [tpe_drive(cal, p, recipe) for p in powers]
    f, c, v = observables_batch(params, fields, stim, options, collection_pol)
    return [(p, float(ci), float(fi), float(vi)) for p, ci, fi, vi in zip(powers, c, f, v)]


TRAJECTORY_COLUMNS = ("t_ps", "p_g", "p_xh", "p_xv", "p_xx", "re_rho_g_xx", "im_rho_g_xx")


def write_trajectory_csv(times, trajectory, path) -> None:
    """Trajectory of a single system, ``trajectory`` shaped (n_t, 4, 4)."""
    traj = np.asarray(trajectory)
    rows = np.column_stack([np.asarray(times, float), *(traj[:, i, i].real for i in range(4)),
                            traj[:, G, XX].real, traj[:, G, XX].imag])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(x)) for x in r) + "\n")
