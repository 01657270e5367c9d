"""Energy wave functions on uniform grids and Hardy-class membership tests.

A function on the real energy line is the boundary value of a Hardy function
of the lower half-plane exactly when its Fourier transform

    G_check(tau) = (1/sqrt(2 pi)) * int dE exp(i E tau) G(E)

vanishes for tau < 0 (Paley-Wiener).  Everything here works with that
transform on the conjugate grid of an :class:`EnergyGrid`.  Units: hbar = 1.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _tails
from .errors import (
    DomainError,
    IncompatibleGridsError,
    InvalidInputError,
    SemigroupDomainError,
    UndefinedRatioError,
)

__all__ = [
    "DEFAULT_E_MAX",
    "DEFAULT_N",
    "DEFAULT_TOL",
    "Direction",
    "EnergyGrid",
    "HalfPlane",
    "ResidualReport",
    "SampledWaveFunction",
    "TimeSignal",
    "born_probability",
    "default_grid",
    "evaluate_offaxis",
    "fourier_to_energy",
    "fourier_to_time",
    "hardy_residual",
    "inner_product",
    "l2_norm",
    "semigroup_check",
    "time_translate",
]

LOGGER = logging.getLogger(__name__)

DEFAULT_N = 2**14
DEFAULT_E_MAX = 200.0
DEFAULT_TOL = 1e-6
#: tau bins on each side of tau = 0 left out of the forbidden region
EXCLUDED_BINS = 1
TAIL_ORDER = 6


class HalfPlane(enum.Enum):
    """Which Hardy class: ``LOWER`` is H^2_- (prepared states), ``UPPER`` is H^2_+."""

    LOWER = "lower"
    UPPER = "upper"

    @classmethod
    def parse(cls, value) -> "HalfPlane":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(f"half plane must be 'lower' or 'upper', got {value!r}") from None

    @property
    def mirror(self) -> "HalfPlane":
        return HalfPlane.UPPER if self is HalfPlane.LOWER else HalfPlane.LOWER


class Direction(enum.Enum):
    """Time-translation phase: states get exp(-iEt), observables exp(+iEt)."""

    STATE = "state"
    OBSERVABLE = "observable"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(
                f"direction must be 'state' or 'observable', got {value!r}"
            ) from None


@dataclass(frozen=True)
class EnergyGrid:
    e_min: float
    e_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.e_min) and math.isfinite(self.e_max)):
            raise InvalidInputError("grid bounds must be finite")
        if not self.e_min < self.e_max:
            raise InvalidInputError(f"need e_min < e_max, got [{self.e_min}, {self.e_max}]")
        if int(self.n) != self.n or self.n < 8:
            raise InvalidInputError(f"need an integer n >= 8, got {self.n}")
        object.__setattr__(self, "e_min", float(self.e_min))
        object.__setattr__(self, "e_max", float(self.e_max))
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self) -> float:
        return (self.e_max - self.e_min) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return self.e_min + np.arange(self.n) * self.spacing

    @property
    def tau_spacing(self) -> float:
        return 2.0 * math.pi / (self.n * self.spacing)

    @property
    def tau_points(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftshift(np.fft.fftfreq(self.n, d=self.spacing))

    def is_compatible(self, other: "EnergyGrid") -> bool:
        return self.n == other.n and math.isclose(
            self.e_min, other.e_min, rel_tol=1e-12, abs_tol=1e-12 * self.spacing
        ) and math.isclose(self.e_max, other.e_max, rel_tol=1e-12, abs_tol=1e-12 * self.spacing)


def default_grid(e_max: float = DEFAULT_E_MAX, n: int = DEFAULT_N) -> EnergyGrid:
    """Symmetric grid [-e_max, e_max]; negative energies are second-sheet values."""
    return EnergyGrid(-e_max, e_max, n)


def _frozen(values):
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledWaveFunction:
    grid: EnergyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1 or values.shape[0] != self.grid.n:
            raise InvalidInputError(
                f"expected {self.grid.n} samples, got array of shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("wave function samples must be finite (no NaN/Inf)")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_function(cls, func, grid: EnergyGrid | None = None) -> "SampledWaveFunction":
        grid = grid or default_grid()
        return cls(grid, func(grid.points))

    @property
    def energies(self) -> np.ndarray:
        return self.grid.points

    def with_values(self, values) -> "SampledWaveFunction":
        return SampledWaveFunction(self.grid, values)

    def conj(self) -> "SampledWaveFunction":
        return self.with_values(np.conj(self.values))

    def scaled(self, factor) -> "SampledWaveFunction":
        return self.with_values(factor * self.values)

    def normalized(self) -> "SampledWaveFunction":
        norm = l2_norm(self)
        if norm == 0:
            raise UndefinedRatioError("cannot normalize a zero function")
        return self.scaled(1.0 / norm)


@dataclass(frozen=True, eq=False)
class TimeSignal:
    tau: np.ndarray
    values: np.ndarray
    energy_grid: EnergyGrid | None = None

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, dtype=float))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.tau.shape != self.values.shape:
            raise InvalidInputError("tau grid and values must have the same length")

    @property
    def spacing(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.spacing)


@dataclass(frozen=True)
class ResidualReport:
    forbidden_mass: float
    passes: bool
    tolerance_used: float
    half_plane: HalfPlane
    forbidden_region: str
    grid: EnergyGrid | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "forbidden_mass": self.forbidden_mass,
            "passes": self.passes,
            "tolerance": self.tolerance_used,
            "half_plane": self.half_plane.value,
            "forbidden_region": self.forbidden_region,
        }
        if self.grid is not None:
            out["grid"] = {"e_min": self.grid.e_min, "e_max": self.grid.e_max, "n": self.grid.n}
        return out


def l2_norm(wf: SampledWaveFunction) -> float:
    """Trapezoidal L2 norm."""
    return math.sqrt(max(inner_product(wf, wf).real, 0.0))


def _dft_to_time(values, grid):
    n, de = grid.n, grid.spacing
    tau = grid.tau_points
    spectrum = np.fft.fftshift(n * np.fft.ifft(values))
    return tau, de / _tails.SQRT_2PI * np.exp(1j * grid.e_min * tau) * spectrum


def fourier_to_time(wf: SampledWaveFunction, complete_tail: bool = False) -> TimeSignal:
    """Fourier transform to the conjugate tau grid, kernel ``exp(+i E tau)``.

    Parameters
    ----------
    wf : SampledWaveFunction
    complete_tail : bool
        If False (default) the samples are transformed as they stand; the
        map is then exactly unitary (``sum |G|^2 dE == sum |G_check|^2 dtau``)
        and invertible by :func:`fourier_to_energy`.  If True, the algebraic
        tail outside the window is fitted and its exact transform added, which
        approximates the full-line integral far better for slowly decaying
        (rational) functions but is no longer a unitary map of the samples.

    Returns
    -------
    TimeSignal
        Samples at ``tau_k = 2 pi k / (n dE)``, ``k = -n//2 .. n - n//2 - 1``.
    """
    grid = wf.grid
    if not complete_tail:
        tau, values = _dft_to_time(wf.values, grid)
        return TimeSignal(tau, values, grid)
    tail = _tails.fit_tail(grid.points, wf.values, order=TAIL_ORDER)
    remainder = wf.values - tail.values(grid.points)
    tau, values = _dft_to_time(remainder, grid)
    return TimeSignal(tau, values + tail.fourier(tau), grid)


def fourier_to_energy(signal: TimeSignal, grid: EnergyGrid | None = None) -> SampledWaveFunction:
    """Inverse of the uncompleted :func:`fourier_to_time`."""
    grid = grid or signal.energy_grid
    if grid is None:
        raise InvalidInputError("an energy grid is required to invert a time signal")
    if grid.n != signal.values.shape[0]:
        raise IncompatibleGridsError("time signal length does not match the energy grid")
    n, de = grid.n, grid.spacing
    shifted = signal.values * np.exp(-1j * grid.e_min * grid.tau_points) * _tails.SQRT_2PI / de
    return SampledWaveFunction(grid, np.fft.fft(np.fft.ifftshift(shifted)) / n)


def _forbidden_mask(tau, dtau, hp):
    edge = (EXCLUDED_BINS + 0.5) * dtau
    return tau < -edge if hp is HalfPlane.LOWER else tau > edge


def hardy_residual(
    wf: SampledWaveFunction,
    hp: HalfPlane | str = HalfPlane.LOWER,
    tol: float = DEFAULT_TOL,
    complete_tail: bool = True,
) -> ResidualReport:
    """Relative L2 mass of the Fourier transform on the forbidden half-line.

    For ``LOWER`` (H^2_-) the forbidden half-line is tau < 0, for ``UPPER``
    it is tau > 0.  The bin on each side of tau = 0 is excluded because its
    sign is ambiguous on a discrete grid.  ``forbidden_mass`` is
    ``sqrt(int_forbidden |G_check|^2 / int |G_check|^2)``.
    """
    hp = HalfPlane.parse(hp)
    if not tol > 0:
        raise InvalidInputError(f"tolerance must be positive, got {tol}")
    signal = fourier_to_time(wf, complete_tail=complete_tail)
    power = np.abs(signal.values) ** 2
    total = float(np.sum(power))
    if total == 0.0 or not math.isfinite(total):
        raise UndefinedRatioError("forbidden mass is undefined for a zero-norm wave function")
    mask = _forbidden_mask(signal.tau, signal.spacing, hp)
    mass = math.sqrt(float(np.sum(power[mask])) / total)
    region = "tau<0" if hp is HalfPlane.LOWER else "tau>0"
    return ResidualReport(mass, mass <= tol, float(tol), hp, region, wf.grid)


def time_translate(
    wf: SampledWaveFunction, t: float, direction: Direction | str = Direction.STATE
) -> SampledWaveFunction:
    """Multiply by ``exp(-iEt)`` (states) or ``exp(+iEt)`` (observables).

    Any real t is accepted; whether the result is still admissible is what
    :func:`semigroup_check` decides.
    """
    direction = Direction.parse(direction)
    if t == 0:
        return wf
    sign = -1.0 if direction is Direction.STATE else 1.0
    return wf.with_values(wf.values * np.exp(sign * 1j * wf.grid.points * t))


def semigroup_check(
    wf: SampledWaveFunction,
    hp: HalfPlane | str = HalfPlane.LOWER,
    t: float = 0.0,
    tol: float = DEFAULT_TOL,
) -> ResidualReport:
    """Hardy residual of the time-translated function.

    Lower-class functions are translated as states, upper-class functions as
    observables.  The caller is expected to have checked that ``wf`` itself
    passes :func:`hardy_residual`.
    """
    hp = HalfPlane.parse(hp)
    direction = Direction.STATE if hp is HalfPlane.LOWER else Direction.OBSERVABLE
    return hardy_residual(time_translate(wf, t, direction), hp, tol)


def evaluate_offaxis(
    wf: SampledWaveFunction, z: complex, hp: HalfPlane | str = HalfPlane.LOWER
) -> complex:
    """Value of a Hardy function inside its half-plane from its boundary values.

    ``g(z) = (i/2pi) int dE g(E)/(E - z)`` for ``LOWER`` and ``z`` in the lower
    half-plane; the prefactor is ``-i/2pi`` for ``UPPER``.  The fitted
    algebraic tail is integrated in closed form and the remainder by the
    trapezoidal rule.
    """
    hp = HalfPlane.parse(hp)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"evaluation point must be finite, got {z}")
    if z.imag == 0:
        raise DomainError(f"evaluation point {z} lies on the real axis")
    if (z.imag < 0) != (hp is HalfPlane.LOWER):
        raise DomainError(f"evaluation point {z} is not inside the {hp.value} half-plane")
    grid = wf.grid
    if abs(z.imag) < 2 * grid.spacing:
        raise DomainError(
            f"evaluation point {z} is closer than two grid spacings to the real axis"
        )
    if abs(z.imag) < 10 * grid.spacing:
        LOGGER.warning(
            "evaluation point %s is within 10 grid spacings of the real axis; "
            "quadrature accuracy degrades", z
        )
    energies = grid.points
    tail = _tails.fit_tail(energies, wf.values, order=TAIL_ORDER)
    remainder = (wf.values - tail.values(energies)) / (energies - z)
    integral = np.trapezoid(remainder, dx=grid.spacing) + tail.cauchy(z)
    prefactor = 1j / (2 * math.pi) if hp is HalfPlane.LOWER else -1j / (2 * math.pi)
    return complex(prefactor * integral)


def _check_grids(a: SampledWaveFunction, b: SampledWaveFunction):
    if not a.grid.is_compatible(b.grid):
        raise IncompatibleGridsError(f"grids differ: {a.grid} vs {b.grid}")


def inner_product(
    psi: SampledWaveFunction, phi: SampledWaveFunction, complete_tail: bool = False
) -> complex:
    """``int dE conj(psi(E)) phi(E)`` by the trapezoidal rule.

    With ``complete_tail`` the integrand's algebraic tail beyond the window is
    included in closed form.
    """
    _check_grids(psi, phi)
    integrand = np.conj(psi.values) * phi.values
    if not complete_tail:
        return complex(np.trapezoid(integrand, dx=psi.grid.spacing))
    energies = psi.grid.points
    tail = _tails.fit_tail(energies, integrand, order=TAIL_ORDER)
    rest = np.trapezoid(integrand - tail.values(energies), dx=psi.grid.spacing)
    return complex(rest + tail.integral())


def born_probability(psi: SampledWaveFunction, phi: SampledWaveFunction, t: float) -> float:
    """``|<psi|phi(t)>|^2`` with ``phi`` evolved as a state; t >= 0 only."""
    if t < 0:
        raise SemigroupDomainError(t, "Born probability of a time-evolved state")
    _check_grids(psi, phi)
    return abs(inner_product(psi, time_translate(phi, t, Direction.STATE))) ** 2
