"""Atmosphere, aerodynamic coefficient polynomials and force computation.

The coefficient polynomials take Mach number and aero angles in radians. Each
coefficient is a polynomial in M plus a polynomial in alpha whose entries may
themselves depend on M; the side-force coefficient is linear in beta.
"""

import logging
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as P

logger = logging.getLogger(__name__)

SEA_LEVEL_DENSITY = 1.225
DENSITY_SCALE_HEIGHT = 7018.00344
SPEED_OF_SOUND = 340.0

MACH_ENVELOPE = (3.0, 10.0)
ALPHA_ENVELOPE = (0.0, np.radians(12.0))

# Mach polynomials, ascending powers M^0..M^5
CL_MACH = (-0.081929, 0.0470142, -0.00919, 0.000774, -0.0000293, 0.000000412)
CD_MACH = (0.08883096, -0.03339562, 0.005044728, -0.0003658, 0.00001274, -0.00000017)
# Side force Mach polynomial starts at M^1
CY_MACH = (0.0, -0.29253, 0.054822, -0.0043203, 0.00015495, -0.0000020829)


class AeroCoefficients(NamedTuple):
    C_L: float
    C_D: float
    C_Y: float


class AeroForces(NamedTuple):
    D: float
    Y: float
    L: float


# Alpha-polynomial coefficients (alpha^1..alpha^5); several entries depend on Mach
def _cl_alpha(M):
    return (1.07727 - 0.0265 * M, -0.49898 + 0.0019 * M**2, 0.76741107, -4.21373565, 8.02706009)


def _cd_alpha(M):
    return (0.183 - 0.00716 * M, -3.587 + 0.0005 * M**2, 59.71887625, -321.68800332, 603.01745298)


def _cy_alpha(M):
    return (0.16502903 - 0.01658312 * M, 2.41401 + 0.01516821 * M**2, -70.3554194, 303.723 - 0.2228107 * M**2, -321.59490071)


# Horner evaluation (numpy) or an explicit term-by-term sum
def _evaluate(coeffs, x, method):
    if method == "horner":
        return float(P.polyval(x, coeffs))
    if method == "terms":
        return float(sum(c * x**k for k, c in enumerate(coeffs)))
    raise ValueError(f"unknown polynomial evaluation method: {method}")


def density(h, rho0=SEA_LEVEL_DENSITY, scale_height=DENSITY_SCALE_HEIGHT):
    return rho0 * np.exp(-h / scale_height)


def mach(V, speed_of_sound=SPEED_OF_SOUND):
    return V / speed_of_sound


def coeff_CL(M, alpha, method="horner"):
    return _evaluate(CL_MACH, M, method) + _evaluate((0.0,) + _cl_alpha(M), alpha, method)


def coeff_CD(M, alpha, method="horner"):
    return _evaluate(CD_MACH, M, method) + _evaluate((0.0,) + _cd_alpha(M), alpha, method)


def coeff_CY(M, alpha, beta, method="horner"):
    return (_evaluate(CY_MACH, M, method) + _evaluate((0.0,) + _cy_alpha(M), alpha, method)) * beta


def in_envelope(M, alpha):
    return MACH_ENVELOPE[0] <= M <= MACH_ENVELOPE[1] and ALPHA_ENVELOPE[0] <= alpha <= ALPHA_ENVELOPE[1]


# All three coefficients, each scaled by its per-episode perturbation multiplier
def aero_coefficients(M, alpha, beta, k_cl=1.0, k_cd=1.0, k_cy=1.0, method="horner"):
    return AeroCoefficients(
        C_L=k_cl * coeff_CL(M, alpha, method),
        C_D=k_cd * coeff_CD(M, alpha, method),
        C_Y=k_cy * coeff_CY(M, alpha, beta, method),
    )


def forces(rho, V, S_ref, coeffs):
    q_s = 0.5 * rho * V * V * S_ref
    return AeroForces(D=q_s * coeffs.C_D, Y=q_s * coeffs.C_Y, L=q_s * coeffs.C_L)
