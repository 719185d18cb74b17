"""Closed-form reflection and impedance models.

Covers the ideal three-media transmission-line S11, the S11 <-> impedance
conversion around a reference impedance, and a lumped RLC-ladder model of a
power distribution network whose input impedance supplies baseline curves for
the device simulator.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, NumericDomainError, OpenCircuitError
from .trace import ComplexTrace, FrequencyGrid

# CODATA 2018 free-space constants.
EPS0 = 8.8541878128e-12  # F/m
MU0 = 1.25663706212e-6  # H/m
ETA0 = math.sqrt(MU0 / EPS0)  # free-space wave impedance, ~376.73 ohm

Z0_DEFAULT = 50.0

# A commonly quoted closed form carries exponent exp(+2j*gamma*L) with
# gamma = j*beta0*sqrt(eps_r), which is a real decaying exponential. Solving
# the three-media boundary conditions directly yields exp(-2*gamma*L), an
# oscillatory term. The boundary solution is treated as ground truth here;
# pass printed_exponent=True to evaluate the quoted form verbatim.
PRINTED_EXPONENT_MATCHES_DERIVATION = False


@dataclass(frozen=True)
class MediumSpec:
    """Non-magnetic slab: relative permittivity and travel length."""

    relative_permittivity: float
    length_m: float
    relative_permeability: float = 1.0

    def __post_init__(self):
        if not (self.relative_permittivity >= 1.0):
            raise ValueError(f"relative_permittivity must be >= 1, got {self.relative_permittivity}")
        if self.length_m < 0:
            raise ValueError(f"length_m must be >= 0, got {self.length_m}")
        if self.relative_permeability != 1.0:
            raise ValueError("only non-magnetic media (relative_permeability = 1) are modeled")

    @property
    def wave_impedance(self) -> float:
        return ETA0 / math.sqrt(self.relative_permittivity)

    def propagation_constant(self, f_hz: float) -> complex:
        beta0 = 2.0 * math.pi * f_hz * math.sqrt(EPS0 * MU0)
        return 1j * beta0 * math.sqrt(self.relative_permittivity)


def s11_transmission_line(f_hz: float, medium: MediumSpec, printed_exponent: bool = False) -> complex:
    """Reflection coefficient of a lossless slab between two free-space media.

    With printed_exponent=False (default) the exponent follows the
    boundary-condition derivation, exp(-2*gamma*L); see the module note.
    """
    if not (f_hz > 0):
        raise ValueError(f"frequency must be > 0, got {f_hz}")
    eta = medium.wave_impedance
    gamma = medium.propagation_constant(f_hz)
    L = medium.length_m
    if printed_exponent:
        x = cmath.exp(2j * gamma * L)
    else:
        x = cmath.exp(-2.0 * gamma * L)
    num = (eta**2 - ETA0**2) * (1.0 - x)
    den = (ETA0 + eta) ** 2 - (eta - ETA0) ** 2 * x
    if den == 0 or not (math.isfinite(den.real) and math.isfinite(den.imag)):
        raise NumericDomainError(
            f"degenerate transmission-line denominator at f={f_hz} Hz, "
            f"eps_r={medium.relative_permittivity}, L={L} m"
        )
    s11 = num / den
    if not (math.isfinite(s11.real) and math.isfinite(s11.imag)):
        raise NumericDomainError(
            f"non-finite S11 at f={f_hz} Hz, eps_r={medium.relative_permittivity}, L={L} m"
        )
    return s11


def s11_transmission_line_sweep(grid: FrequencyGrid, medium: MediumSpec,
                                printed_exponent: bool = False) -> ComplexTrace:
    samples = np.array(
        [s11_transmission_line(f, medium, printed_exponent) for f in grid.stamps()],
        dtype=np.complex128,
    )
    return ComplexTrace(grid, samples)


def reflection_to_impedance(s11: complex, z0: float = Z0_DEFAULT) -> complex:
    """Z = z0 * (1 + s11) / (1 - s11)."""
    if not (z0 > 0):
        raise ValueError(f"reference impedance must be > 0, got {z0}")
    if s11 == 1:
        raise OpenCircuitError("S11 = 1 corresponds to an open circuit (infinite impedance)")
    return z0 * (1.0 + s11) / (1.0 - s11)


def impedance_to_reflection(z: complex, z0: float = Z0_DEFAULT) -> complex:
    """s11 = (z - z0) / (z + z0); inverse of reflection_to_impedance."""
    if not (z0 > 0):
        raise ValueError(f"reference impedance must be > 0, got {z0}")
    if z + z0 == 0:
        raise DegenerateInputError(f"z = -z0 = {z} ohm has no finite reflection coefficient")
    return (z - z0) / (z + z0)


@dataclass(frozen=True)
class SeriesRL:
    """Series resistance + inductance segment: Z = R + j*2*pi*f*L."""

    resistance_ohm: float
    inductance_h: float

    def __post_init__(self):
        if self.resistance_ohm < 0 or self.inductance_h < 0:
            raise ValueError("series element values must be >= 0")

    def impedance(self, f_hz: float) -> complex:
        return self.resistance_ohm + 2j * math.pi * f_hz * self.inductance_h


@dataclass(frozen=True)
class ShuntRC:
    """Shunt parallel RC branch to ground: Y = 1/R + j*2*pi*f*C.

    resistance_ohm = inf means no resistive path (a pure capacitor branch).
    """

    resistance_ohm: float
    capacitance_f: float

    def __post_init__(self):
        if self.resistance_ohm < 0 or self.capacitance_f < 0:
            raise ValueError("shunt element values must be >= 0")

    def admittance(self, f_hz: float) -> complex:
        g = 0.0 if math.isinf(self.resistance_ohm) else (
            math.inf if self.resistance_ohm == 0 else 1.0 / self.resistance_ohm
        )
        return g + 2j * math.pi * f_hz * self.capacitance_f


@dataclass(frozen=True)
class RlcLadder:
    """Port-to-ground ladder of series RL segments and shunt RC branches.

    Stages are ordered from the measurement port inward; the far end is open.
    """

    stages: tuple

    def __post_init__(self):
        if len(self.stages) == 0:
            raise ValueError("ladder needs at least one stage")
        for s in self.stages:
            if not isinstance(s, (SeriesRL, ShuntRC)):
                raise TypeError(f"unknown ladder stage {s!r}")

    @classmethod
    def default_pdn(cls) -> "RlcLadder":
        """Representative VRM-to-die ladder: bulk/ceramic decoupling, package
        parasitics, and N on-die RC branches."""
        stages = [
            SeriesRL(2e-3, 1e-10),          # VRM output / PCB spreading
            ShuntRC(math.inf, 220e-6),      # bulk capacitor bank
            SeriesRL(1e-3, 5e-10),
            ShuntRC(math.inf, 4.7e-6),      # ceramic bank
            SeriesRL(1e-3, 8e-10),          # package/bumps
            ShuntRC(math.inf, 2.0e-8),      # package plane capacitance
            SeriesRL(5e-4, 1.5e-10),        # on-die power grid
        ] + [
            # N on-die narrowband RC branches
            ShuntRC(0.8 + 0.25 * k, 4.0e-9 / (k + 1)) for k in range(4)
        ]
        return cls(tuple(stages))


def rlc_ladder_impedance(ladder: RlcLadder, f_hz: float) -> complex:
    """Input impedance at f via series/shunt composition from the open far end."""
    if not (f_hz > 0):
        raise ValueError(f"frequency must be > 0, got {f_hz}")
    z = complex(math.inf)  # open termination
    for stage in reversed(ladder.stages):
        if isinstance(stage, SeriesRL):
            if math.isinf(z.real) or math.isinf(z.imag):
                z = complex(math.inf)
            else:
                z = stage.impedance(f_hz) + z
        else:
            y = stage.admittance(f_hz)
            if not (math.isinf(z.real) or math.isinf(z.imag)):
                if z == 0:
                    continue  # shorted downstream: shunt branch is bypassed
                y = y + 1.0 / z
            if y == 0:
                raise NumericDomainError(f"zero shunt admittance at f={f_hz} Hz")
            if math.isinf(y.real):
                z = 0j
            else:
                z = 1.0 / y
    if math.isinf(z.real) or math.isinf(z.imag):
        raise NumericDomainError(f"ladder input impedance is unbounded at f={f_hz} Hz")
    return z


def rlc_ladder_sweep(ladder: RlcLadder, grid: FrequencyGrid) -> np.ndarray:
    return np.array([rlc_ladder_impedance(ladder, f) for f in grid.stamps()], dtype=np.complex128)


def ladder_baseline_trace(ladder: RlcLadder, grid: FrequencyGrid, z0: float = Z0_DEFAULT) -> ComplexTrace:
    """Baseline S11 of the ladder across the grid."""
    z = rlc_ladder_sweep(ladder, grid)
    return ComplexTrace(grid, (z - z0) / (z + z0))
