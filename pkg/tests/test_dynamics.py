import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarpsim import dynamics as dyn
from sarpsim.pulse import TimeGrid, make_gaussian

G, XH, XV, XX = dyn.G, dyn.XH, dyn.XV, dyn.XX
DELTA = 4.0 / (2 * 0.6582119569)


def rk4_oracle(params, field):
    """Fixed-step RK4 on the state vector using the raw envelope samples.

    Steps span two grid intervals so the midpoint lands on a sample; no
    interpolation code is shared with the solver.
    """
    t, env, dt = field.times, field.envelope * np.exp(1j * field.carrier_offset * field.times), field.grid.dt

    def H(i):
        h = np.diag([0, DELTA, DELTA, 0]).astype(complex)
        h[G, XH] = h[XH, XX] = env[i] / 2
        return h + np.triu(h, 1).conj().T

    psi = np.array([1, 0, 0, 0], complex)
    h = 2 * dt
    for i in range(0, len(t) - 2, 2):
        H0, H1, H2 = H(i), H(i + 1), H(i + 2)
        k1 = -1j * H0 @ psi
        k2 = -1j * H1 @ (psi + h / 2 * k1)
        k3 = -1j * H1 @ (psi + h / 2 * k2)
        k4 = -1j * H2 @ (psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


class TestHamiltonian:
    def test_free(self, params):
        H = dyn.build_hamiltonian(0.0, params, dyn.DriveSet())
        assert np.allclose(H, np.diag([0, DELTA, DELTA, 0]), atol=1e-12)
        assert abs(DELTA - 3.039) < 1e-3

    def test_hermitian(self, params):
        rng = np.random.default_rng(3)
        grid = TimeGrid.symmetric(32.0, 1024)
        env = rng.normal(size=1024) + 1j * rng.normal(size=1024)
        from sarpsim.pulse import TemporalField
        drives = dyn.DriveSet(TemporalField(grid, env, 0.4),
                              dyn.Stim(TemporalField(grid, env, -0.2), "V", 0.0, "peak"))
        for t in rng.uniform(-20, 20, 10):
            H = dyn.build_hamiltonian(t, params, drives)
            assert np.max(np.abs(H - H.conj().T)) < 1e-14

    def test_v_stim_selection(self, params):
        drives = dyn.DriveSet(stim=dyn.Stim(make_gaussian(2.0, math.pi, grid=TimeGrid.symmetric(32, 1024)),
                                            "V", delay=0.0, anchor="peak"))
        H = dyn.build_hamiltonian(0.0, params, drives)
        assert H[XV, XX] != 0
        assert H[XH, XX] == 0 and H[G, XH] == 0 and H[G, XV] == 0

    def test_outside_grid(self, params):
        drives = dyn.DriveSet(make_gaussian(2.0, 1.0, grid=TimeGrid.symmetric(32, 1024)))
        with pytest.raises(dyn.DynamicsError):
            dyn.build_hamiltonian(100.0, params, drives)

    def test_tpe_carrier_phase(self, params):
        f = make_gaussian(2.0, 1.0, carrier_offset=0.7, grid=TimeGrid.symmetric(32, 1024))
        t = 0.3
        H = dyn.build_hamiltonian(t, params, dyn.DriveSet(f))
        assert abs(np.angle(H[G, XH]) - 0.7 * t) < 1e-9
        assert H[G, XH] == H[XH, XX]


class TestEvolve:
    def test_ground_unchanged(self, params):
        rho, _ = dyn.evolve(dyn.ket_dm("g"), params, dyn.DriveSet(), dyn.SimOptions.with_decay(params))
        assert np.max(np.abs(rho - dyn.ket_dm("g"))) < 1e-10

    def test_cascade(self, params):
        opts = dyn.SimOptions.with_decay(params)
        rho, res = dyn.evolve(dyn.ket_dm("xx"), params, dyn.DriveSet(), opts)
        assert rho[G, G].real >= 0.999
        assert abs(res.emitted[0, 0] - 0.5) < 1e-3 and abs(res.emitted[0, 1] - 0.5) < 1e-3

    def test_stim_pi_rotation(self, params):
        stim = dyn.default_stim(delay=0.0, anchor="peak")
        rho, _ = dyn.evolve(dyn.ket_dm("xx"), params, dyn.DriveSet(stim=stim))
        assert abs(rho[XH, XH].real - 1) < 1e-6

    def test_pi_power_against_oracle(self, params, cal, recipe0):
        f = dyn.tpe_drive(cal, 1.0, recipe0)
        drives = dyn.DriveSet(f)
        rho = dyn.evolve(dyn.ket_dm("g"), params, drives)[0]
        assert rho[XX, XX].real >= 0.98
        psi = rk4_oracle(params, f)
        assert abs(abs(psi[XX]) ** 2 - rho[XX, XX].real) < 1e-4

    def test_decay_requires_tail(self, params):
        f = make_gaussian(2.0, 1.0, grid=TimeGrid.symmetric(32, 1024))
        with pytest.raises(dyn.DynamicsError):
            dyn.evolve(dyn.ket_dm("g"), params, dyn.DriveSet(f),
                       dyn.SimOptions(TimeGrid.symmetric(150, 4096), decay_enabled=True))

    def test_drive_outside_window(self, params):
        f = make_gaussian(2.0, 1.0, grid=TimeGrid.symmetric(400, 8192), t_peak=300.0)
        with pytest.raises(dyn.DynamicsError):
            dyn.evolve(dyn.ket_dm("g"), params, dyn.DriveSet(f))

    def test_invalid_rho(self, params):
        with pytest.raises(dyn.DynamicsError):
            dyn.evolve(2 * dyn.ket_dm("g"), params, dyn.DriveSet())

    def test_batch_matches_single(self, params, cal, recipe0):
        fs = [dyn.tpe_drive(cal, p, recipe0) for p in (0.5, 1.0, 2.0)]
        batch = dyn.evolve_batch(dyn.ket_dm("g"), params, [dyn.DriveSet(f) for f in fs]).rho
        for f, rb in zip(fs, batch):
            assert np.max(np.abs(dyn.evolve(dyn.ket_dm("g"), params, dyn.DriveSet(f))[0] - rb)) < 1e-6

    def test_trajectory_invariants(self, params, cal, recipe45):
        opts = dyn.SimOptions(store_trajectory=True)
        rho, res = dyn.evolve(dyn.ket_dm("g"), params, dyn.DriveSet(dyn.tpe_drive(cal, 3.0, recipe45),
                                                                    dyn.default_stim()), opts)
        traj = res.trajectory
        assert traj.shape == (opts.grid.n_samples, 4, 4)
        tr = np.trace(traj, axis1=1, axis2=2)
        assert np.max(np.abs(tr - 1)) < 1e-8
        assert np.min(np.linalg.eigvalsh(traj)) > -1e-9
        purity = np.einsum("tij,tji->t", traj, traj).real
        assert np.max(np.abs(purity - 1)) < 1e-8
        assert np.allclose(traj[-1], rho, atol=1e-12)

    def test_trajectory_csv(self, params, tmp_path):
        opts = dyn.SimOptions(store_trajectory=True)
        stim = dyn.default_stim(delay=0.0, anchor="peak")
        _, res = dyn.evolve(dyn.ket_dm("xx"), params, dyn.DriveSet(stim=stim), opts)
        dyn.write_trajectory_csv(res.times, res.trajectory, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "t_ps,p_g,p_xh,p_xv,p_xx,re_rho_g_xx,im_rho_g_xx"
        assert len(lines) == opts.grid.n_samples + 1


class TestCalibration:
    def test_definition(self, params, cal, recipe0):
        assert cal.rho_xx > 0.99
        f = dyn.prep_fidelity(params, dyn.DriveSet(dyn.tpe_drive(cal, 1.0, recipe0)))
        assert abs(f - cal.rho_xx) < 1e-3
        half = dyn.prep_fidelity(params, dyn.DriveSet(dyn.tpe_drive(cal, 0.5, recipe0)))
        assert half < f

    def test_grid_refinement(self, params, cal):
        fine = dyn.default_recipe(grid=TimeGrid.symmetric(150.0, 8192))
        cal2 = dyn.calibrate_pi_power(params, fine)
        # power scale is the input-area squared, independent of the grid
        assert abs(cal2.p_pi / cal.p_pi - 1) < 5e-3

    def test_rejects_chirped(self, params, recipe45):
        with pytest.raises(dyn.DynamicsError):
            dyn.calibrate_pi_power(params, recipe45)

    def test_input_area(self, cal):
        assert cal.input_area(4.0) == pytest.approx(2 * math.sqrt(cal.p_pi))


class TestObservables:
    def test_zero_power(self, params, cal, recipe0):
        d = dyn.DriveSet(dyn.tpe_drive(cal, 0.0, recipe0))
        assert dyn.prep_fidelity(params, d) < 1e-10
        assert dyn.x_counts(params, d) < 1e-10

    def test_chirped_three_pi(self, params, cal, recipe45):
        d = dyn.DriveSet(dyn.tpe_drive(cal, 3.0, recipe45))
        assert dyn.prep_fidelity(params, d) >= 0.95
        rho = dyn.evolve(dyn.ket_dm("g"), params, d)[0]
        assert dyn.pnc_visibility(rho) < 0.05

    def test_unchirped_trough(self, params, cal, recipe0):
        f = dyn.prep_fidelity_batch(params, [dyn.DriveSet(dyn.tpe_drive(cal, p, recipe0))
                                             for p in (1.0, 2.0, 3.0)])
        assert f[1] < f[0] and f[1] < f[2]

    def test_sarp_doubles_counts(self, params, cal, recipe45):
        f = dyn.tpe_drive(cal, 3.0, recipe45)
        arp = dyn.x_counts(params, dyn.DriveSet(f))
        sarp = dyn.x_counts(params, dyn.DriveSet(f, dyn.default_stim()))
        assert sarp / arp == pytest.approx(2.0, rel=0.02)

    def test_cross_polarised_stim_empties_collection(self, params, cal, recipe45):
        f = dyn.tpe_drive(cal, 3.0, recipe45)
        c = dyn.x_counts(params, dyn.DriveSet(f, dyn.default_stim(polarization="V")))
        assert c < 0.02

    def test_decay_modes_agree(self, params, cal, recipe0):
        d = dyn.DriveSet(dyn.tpe_drive(cal, 1.0, recipe0))
        off = dyn.x_counts(params, d)
        on = dyn.x_counts(params, d, dyn.SimOptions.with_decay(params))
        assert abs(on / off - 1) < 0.02

    def test_prep_fidelity_rejects_decay(self, params, cal, recipe0):
        d = dyn.DriveSet(dyn.tpe_drive(cal, 1.0, recipe0))
        with pytest.raises(dyn.DynamicsError):
            dyn.prep_fidelity(params, d, dyn.SimOptions.with_decay(params))

    def test_pnc_closed_form(self):
        for theta in np.linspace(0, 2 * np.pi, 9):
            psi = np.array([math.cos(theta / 2), 0, 0, math.sin(theta / 2)])
            rho = np.outer(psi, psi.conj())
            expect = math.cos(theta / 2) ** 2 if math.sin(theta / 2) ** 2 > 1e-12 else 0.0
            assert abs(dyn.pnc_visibility(rho) - expect) < 1e-10
        assert dyn.pnc_visibility(dyn.ket_dm("g")) == 0.0
        assert dyn.pnc_visibility(dyn.ket_dm("xx")) == 0.0

    def test_tolerance_halving(self, params, cal, recipe0):
        ds = [dyn.DriveSet(dyn.tpe_drive(cal, p, recipe0)) for p in (1.0, 3.0)]
        a = dyn.prep_fidelity_batch(params, ds, dyn.SimOptions(integrator_tol=1e-8))
        b = dyn.prep_fidelity_batch(params, ds, dyn.SimOptions(integrator_tol=5e-9))
        assert np.max(np.abs(a - b)) < 1e-5

    def test_detuning_symmetry(self, params, cal):
        # centred slit, carrier detuned both ways
        base = dyn.default_recipe()
        out = []
        for d in (-0.4, 0.4):
            r = replace(base, input_carrier=d, shaper=replace(base.shaper, center_detuning=d))
            out.append(dyn.prep_fidelity(params, dyn.DriveSet(dyn.tpe_drive(cal, 1.0, r))))
        assert abs(out[0] - out[1]) < 1e-3


class TestRabiTrace:
    def test_empty(self, params, recipe0):
        assert dyn.rabi_trace(params, recipe0, []) == []

    def test_rows(self, params, cal, recipe0):
        rows = dyn.rabi_trace(params, recipe0, [0.0, 1.0], cal=cal)
        assert rows[0] == (0.0, pytest.approx(0.0, abs=1e-10), pytest.approx(0.0, abs=1e-10),
                           pytest.approx(0.0, abs=1e-10))
        p, counts, fp, v = rows[1]
        assert fp > 0.99 and counts == pytest.approx(fp / 2, rel=1e-3) and v < 0.01


@settings(max_examples=10)
@given(st.lists(st.tuples(st.floats(0.0, 6.0), st.floats(-0.6, 0.6), st.sampled_from([0.0, 45.0]),
                          st.booleans()), min_size=10, max_size=10))
def test_random_drive_invariants(params, cal, configs):
    """Trace and positivity on randomised drives (10 x 10 = 100 configurations)."""
    drives = []
    for p, det, gdd, stim in configs:
        r = dyn.default_recipe(gdd=gdd, slit_center=det)
        drives.append(dyn.DriveSet(dyn.tpe_drive(cal, p, r), dyn.default_stim() if stim else None))
    rho = dyn.evolve_batch(dyn.ket_dm("g"), params, drives).rho
    dyn.validate_density_matrix(rho)
