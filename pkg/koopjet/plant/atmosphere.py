"""International Standard Atmosphere (troposphere) and inlet total conditions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from koopjet.config import P_REF, T_REF

ISA_T0: float = 288.15  # K, sea-level static temperature
ISA_P0: float = 101325.0  # Pa, sea-level static pressure
ISA_LAPSE: float = 0.0065  # K/m
ISA_EXPONENT: float = 5.25588  # g / (lapse * R_air)
H_TROPOPAUSE: float = 11000.0  # m


@dataclass(frozen=True)
class Ambient:
    """Flight condition and the resulting engine-inlet total state."""

    H: float
    M0: float
    p0: float
    T0: float
    p1t: float
    T1t: float

    @property
    def theta(self) -> float:
        """Inlet total temperature relative to the reference temperature."""
        return self.T1t / T_REF

    @property
    def delta(self) -> float:
        """Inlet total pressure relative to the reference pressure."""
        return self.p1t / P_REF


def isa_static(H: float) -> tuple[float, float]:
    """Static pressure (Pa) and temperature (K) at altitude H in the troposphere."""
    if not 0.0 <= H <= H_TROPOPAUSE:
        raise ValueError(f"Altitude must lie in [0, {H_TROPOPAUSE:.0f}] m, got {H}.")
    T0: float = ISA_T0 - ISA_LAPSE * H
    p0: float = ISA_P0 * (T0 / ISA_T0) ** ISA_EXPONENT
    return p0, T0


def isa_inlet(H: float, M0: float, gamma_a: float = 1.4, sigma_inlet: float = 0.98) -> Ambient:
    """Inlet total conditions after isentropic ram rise and the intake pressure loss.

    Raises:
        ValueError: If H is outside [0, 11000] m or M0 outside [0, 1).
    """
    if not 0.0 <= M0 < 1.0:
        raise ValueError(f"Flight Mach number must lie in [0, 1), got {M0}.")
    p0, T0 = isa_static(H)
    T1t: float = T0 * (1.0 + 0.5 * (gamma_a - 1.0) * M0**2)
    p1t: float = p0 * (T1t / T0) ** (gamma_a / (gamma_a - 1.0)) * sigma_inlet
    return Ambient(H=float(H), M0=float(M0), p0=p0, T0=T0, p1t=p1t, T1t=T1t)


def flight_speed(ambient: Ambient, gamma_a: float = 1.4, R: float = 287.0) -> float:
    """True airspeed in m/s."""
    return ambient.M0 * float(np.sqrt(gamma_a * R * ambient.T0))
