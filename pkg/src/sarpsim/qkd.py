"""BB84 key rates, coin-flip fairness and photon-number coherence curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

LOSS_STEP_DB = 0.01
MAX_LOSS_DB = 200.0


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class QkdParams:
    mu: float = 0.1
    rep_rate: float = 8e7  # Hz
    accum_time: float = 100.0  # s
    f_ec: float = 1.2
    q_sift: float = 0.5
    e_det: float = 0.02
    p_dc: float = 1e-7
    eps: float = 1e-9
    g2: float = 0.005
    q_key: float = 0.9
    mu_assumed: float | None = None  # value the parties believe in; bounds tagging conservatively

    def __post_init__(self):
        for name in ("mu", "q_sift", "e_det", "p_dc", "q_key"):
            _check_prob(name, getattr(self, name))
        if self.rep_rate <= 0 or self.accum_time <= 0:
            raise ValueError("rep_rate and accum_time must be positive")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.g2 < 0:
            raise ValueError("g2 must be non-negative")
        if self.mu_assumed is not None:
            _check_prob("mu_assumed", self.mu_assumed)

    @property
    def mu_tagging(self) -> float:
        """Mean photon number entering the multi-photon bound."""
        return self.mu if self.mu_assumed is None else max(self.mu, self.mu_assumed)


@dataclass(frozen=True)
class ChannelParams:
    loss_db: float = 0.0
    eta_bob: float = 1.0

    def __post_init__(self):
        if self.loss_db < 0:
            raise ValueError("loss_db must be non-negative")
        _check_prob("eta_bob", self.eta_bob)

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0) * self.eta_bob


@dataclass(frozen=True)
class RateResult:
    p_click: float
    qber: float
    delta_tagged: float
    r_asym: float
    r_finite: float | None
    secure_bits: float
    n_sift: float
    xi: float = 0.0
    finite_penalty: float = 0.0
    defined: bool = True
    diagnostic: str = ""


def multiphoton_prob(mu: float, g2: float) -> float:
    if mu < 0 or g2 < 0:
        raise ValueError("mu and g2 must be non-negative")
    return 0.5 * mu * mu * g2


def binary_entropy(x) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument outside [0, 1]: {x}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _bracket(delta, e_pa, e_ec, f_ec):
    """Secure bits per sifted key bit; None when no privacy can be distilled."""
    if delta >= 1.0 or e_pa / (1.0 - delta) >= 0.5:
        return None
    return (1 - delta) * (1 - binary_entropy(e_pa / (1 - delta))) - f_ec * binary_entropy(e_ec)


def secure_key_rate(params: QkdParams, chan: ChannelParams = ChannelParams(),
                    mode: str = "finite") -> RateResult:
    """Secure fraction per pulse (GLLP with single-photon tagging).

    Negative fractions are reported unchanged; only ``secure_bits`` is clamped.
    """
    if mode not in ("asymptotic", "finite"):
        raise ValueError(f"unknown mode {mode!r}")
    p = params
    eta = chan.transmission
    p_click = 1.0 - (1.0 - p.p_dc) * (1.0 - p.mu * eta)
    if p_click <= 0:
        return RateResult(0.0, 0.5, 1.0, 0.0, 0.0 if mode == "finite" else None, 0.0, 0.0,
                          defined=False, diagnostic="no clicks")
    qber = min(0.5, (0.5 * p.p_dc + p.e_det * p.mu * eta) / p_click)
    delta = min(1.0, multiphoton_prob(p.mu_tagging, p.g2) / p_click)
    pref = p.q_sift * p.q_key * p_click
    b = _bracket(delta, qber, qber, p.f_ec)
    r_asym = 0.0 if b is None else pref * b
    n_pulses = p.rep_rate * p.accum_time
    n_sift = n_pulses * p.q_sift * p_click
    if mode == "asymptotic":
        bits = max(0.0, r_asym * n_pulses)
        return RateResult(p_click, qber, delta, r_asym, None, bits, n_sift, defined=b is not None)

    if n_sift < 1.0:
        return RateResult(p_click, qber, delta, r_asym, min(0.0, r_asym), 0.0, n_sift,
                          defined=False, diagnostic=f"sifted block too small (N_sift={n_sift:.3g})")
    n_pe = (1.0 - p.q_key) * n_sift
    n_key = p.q_key * n_sift
    xi = math.sqrt(math.log(2.0 / p.eps) / (2.0 * n_pe)) if n_pe > 0 else math.inf
    penalty = (math.log2(2.0 / p.eps) + 2.0 * math.log2(1.0 / p.eps)) / n_key
    bf = _bracket(delta, qber + xi, qber, p.f_ec)
    if bf is None:
        r_fin = min(0.0, r_asym)
        diag = "error rate after estimation broadening leaves no privacy"
    else:
        r_fin = pref * (bf - penalty)
        diag = ""
    return RateResult(p_click, qber, delta, r_asym, r_fin, max(0.0, r_fin * n_pulses), n_sift,
                      xi, penalty, bf is not None, diag)


def _rate(params, loss, mode, eta_bob=1.0):
    res = secure_key_rate(params, ChannelParams(loss, eta_bob), mode)
    return res.r_asym if mode == "asymptotic" else res.r_finite


def tolerable_loss(params: QkdParams, mode: str = "finite", eta_bob: float = 1.0) -> float | None:
    """Largest loss on the 0.01 dB lattice with positive secure fraction; None if no key."""
    if not _rate(params, 0.0, mode, eta_bob) > 0:
        return None
    lo, hi = 0, int(round(MAX_LOSS_DB / LOSS_STEP_DB))
    if _rate(params, hi * LOSS_STEP_DB, mode, eta_bob) > 0:
        return hi * LOSS_STEP_DB
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _rate(params, mid * LOSS_STEP_DB, mode, eta_bob) > 0:
            lo = mid
        else:
            hi = mid
    return round(lo * LOSS_STEP_DB, 2)


def rate_curve(params: QkdParams, losses, mode: str = "finite") -> np.ndarray:
    return np.array([_rate(params, float(l), mode) for l in losses])


# -- coin flipping ---------------------------------------------------------------

@dataclass(frozen=True)
class CoinFlipParams:
    a: float = 0.9
    k_rounds: int = 500
    mu_nominal: float = 0.1
    g2: float = 0.005
    eta: float = 1.0

    def __post_init__(self):
        _check_prob("a", self.a)
        _check_prob("eta", self.eta)
        if self.k_rounds < 1 or self.mu_nominal <= 0:
            raise ValueError("k_rounds >= 1 and mu_nominal > 0 required")


@dataclass(frozen=True)
class CoinFlipResult:
    p_cheat_bob: float
    p_cheat_alice: float
    diff: float


def _bob_cheat(cf: CoinFlipParams, mu: float) -> float:
    p_det = mu * cf.eta
    if p_det <= 0:
        return cf.a
    pm_det = min(1.0, multiphoton_prob(mu, cf.g2) / p_det)
    k_eff = min(float(cf.k_rounds), cf.k_rounds * p_det)
    p_multi = -math.expm1(k_eff * math.log1p(-pm_det)) if pm_det < 1 else 1.0
    return cf.a + (1.0 - cf.a) * p_multi


def coinflip_fairness(cf: CoinFlipParams, mu: float) -> CoinFlipResult:
    """Stand-in cheating model: multi-photon leaks let Bob cheat with certainty."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    bob = _bob_cheat(cf, mu)
    alice = _bob_cheat(cf, cf.mu_nominal)
    return CoinFlipResult(bob, alice, bob - alice)


# -- photon-number coherence versus pulse area -------------------------------------

def pnc_resonant(theta) -> np.ndarray:
    return np.cos(np.asarray(theta, dtype=float) / 2.0) ** 2


def chirped_pnc_hook(gdd: float = 45.0, params=None) -> Callable[[Sequence[float]], np.ndarray]:
    """Return ``powers_in_pi -> V(XX, g)`` after the chirped shaped pulse."""
    from . import dynamics as dyn

    params = params or dyn.QdParams()

    def hook(powers):
        cal = dyn.calibrate_pi_power(params)
        recipe = dyn.default_recipe(gdd=gdd)
        drives = [dyn.DriveSet(dyn.tpe_drive(cal, float(p), recipe)) for p in powers]
        res = dyn.evolve_batch(dyn.ket_dm("g"), params, drives, dyn.SimOptions())
        return np.atleast_1d(dyn.pnc_visibility(res.rho))

    return hook


def pnc_vs_area(theta_list, excitation: str = "resonant",
                dynamics_hook: Callable | None = None) -> list[tuple[float, float]]:
    """Photon-number coherence against pulse area.

    For chirped excitation the area ``theta`` maps to power ``theta / pi`` in
    units of the calibrated pi power.
    """
    theta = np.asarray(theta_list, dtype=float)
    if np.any(theta < 0):
        raise ValueError("pulse areas must be non-negative")
    if excitation == "resonant":
        v = pnc_resonant(theta)
    elif excitation == "chirped":
        hook = dynamics_hook or chirped_pnc_hook()
        v = np.asarray(hook(theta / math.pi), dtype=float)
    else:
        raise ValueError(f"unknown excitation {excitation!r}")
    return [(float(t), float(x)) for t, x in zip(theta, v)]


def with_mu(params: QkdParams, mu: float) -> QkdParams:
    return replace(params, mu=mu)
