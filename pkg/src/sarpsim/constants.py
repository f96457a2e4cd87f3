"""Physical constants shared by every module (energies in meV, times in ps)."""

HBAR_MEV_PS = 0.6582119569  # meV * ps
HC_EV_NM = 1239.841984  # eV * nm

#: Wavelength (nm) at which half the biexciton energy sits.
TPE_RESONANCE_NM = 796.0


def mev_to_radps(energy_mev):
    return energy_mev / HBAR_MEV_PS


def wavelength_to_detuning(wavelength_nm, reference_nm=TPE_RESONANCE_NM):
    """Angular-frequency offset (rad/ps) of a laser line from ``reference_nm``."""
    e_mev = 1e3 * HC_EV_NM / wavelength_nm
    e_ref = 1e3 * HC_EV_NM / reference_nm
    return (e_mev - e_ref) / HBAR_MEV_PS


def detuning_to_wavelength(detuning_radps, reference_nm=TPE_RESONANCE_NM):
    e_ref = 1e3 * HC_EV_NM / reference_nm
    return 1e3 * HC_EV_NM / (e_ref + detuning_radps * HBAR_MEV_PS)
