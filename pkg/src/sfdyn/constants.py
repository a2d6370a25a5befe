"""Physical constants and unit conversions (Hartree atomic units internally)."""

import math

# time
FS_TO_AU = 41.341373
AU_TO_FS = 1.0 / FS_TO_AU

# 1 a.u. of time in seconds, for rates quoted in 1/s
AU_TIME_SECONDS = 2.4188843265857e-17

# peak field amplitude from intensity in W/cm^2: E0 = sqrt(I / I_AU)
INTENSITY_AU_WCM2 = 3.509445e16

# angular frequency (a.u.) from vacuum wavelength in nm
SPEED_OF_LIGHT_AU = 137.035999084
BOHR_NM = 0.052917721090380
NM_TO_OMEGA_AU = 2.0 * math.pi * SPEED_OF_LIGHT_AU * BOHR_NM  # omega = this / lambda_nm

PROTON_MASS_AU = 1836.15267343


def field_amplitude(intensity_wcm2):
    """Peak electric field in a.u. for a given intensity in W/cm^2."""
    return math.sqrt(intensity_wcm2 / INTENSITY_AU_WCM2)


def omega_from_wavelength(lambda_nm):
    return NM_TO_OMEGA_AU / lambda_nm


def rate_au_to_per_second(gamma_au):
    return gamma_au / AU_TIME_SECONDS
