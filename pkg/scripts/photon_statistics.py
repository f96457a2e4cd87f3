"""Monte-Carlo photon statistics: preparation fidelity, g2(0), HOM and MZI visibility."""

import argparse

import numpy as np

from sarpsim import photons as ph


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pulses", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    n, seed = args.pulses, args.seed
    det = ph.DetectorModel()

    for f in (0.5, 0.8, 1.0):
        rec = ph.sample_emissions(ph.EmissionModel(f_prep=f), n, seed)
        start = ph.detect(rec.xx_photons(), det, ph.SIGMA_PLUS, seed, rec.span, channel=1)
        stop = ph.detect(rec.x_photons(), det, ph.SIGMA_PLUS, seed, rec.span, channel=2)
        est = ph.fidelity_eq1(ph.cross_correlate(start, stop))
        print(f"f_prep {f:.2f}: F_p = {est.raw:.4f}")

    for pm in (0.0, 0.001, 0.005):
        rec = ph.sample_emissions(ph.EmissionModel(p_multi=pm), n, seed)
        res = ph.hbt_g2(ph.detect(rec.x_photons(), det, span=rec.span), seed=seed)
        print(f"p_multi {pm}: g2(0) = {res.g2_zero:.5f}")

    m = ph.EmissionModel()
    for label, model in (("spontaneous", m), ("stimulated", ph.EmissionModel(stim_enabled=True))):
        v = ph.hom_visibility(model, det, n, seed).visibility
        print(f"HOM {label}: V = {v:.4f}")
    print(f"jitter-limited expectation: {m.gamma_xx / (m.gamma_xx + m.gamma_x):.4f}")

    phases = np.linspace(0, 2 * np.pi, 25)
    for v in (0.0, 0.5, 1.0):
        print(f"MZI scan, V = {v}: estimate {ph.mzi_pnc_scan(v, 1e4, phases, seed=seed).v_est:.4f}")


if __name__ == "__main__":
    main()
