"""Breit-Wigner poles, Gamow states and their semigroup evolution.

A resonance is an S-matrix pole at ``z_R = E_R - i Gamma/2`` with amplitude
``a(E) = r / (E - z_R)``.  Its Gamow state decays as ``exp(-i z_R t)`` for
t >= 0 only, giving survival ``exp(-Gamma t)`` and lifetime ``1/Gamma``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    CoverageError,
    FitFailureError,
    InvalidInputError,
    NotAnObservableError,
    PoleEvaluationError,
    RankDeficiencyError,
    SemigroupDomainError,
)
from .hardy import (
    DEFAULT_TOL,
    EnergyGrid,
    HalfPlane,
    SampledWaveFunction,
    evaluate_offaxis,
    hardy_residual,
)

LOGGER = logging.getLogger(__name__)

#: the sampled Gamow state has unit L2 norm over the whole real line
PAIRING_CONVENTION = "unit-L2 Gamow amplitude; <psi|z_R> = conj(psi) continued to z_R"


@dataclass(frozen=True)
class ResonancePole:
    e_r: float
    gamma: float
    residue: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not (math.isfinite(self.e_r) and math.isfinite(self.gamma)):
            raise InvalidInputError("pole parameters must be finite")
        if not self.gamma > 0:
            raise InvalidInputError(f"width gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "e_r", float(self.e_r))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "residue", complex(self.residue))

    @property
    def z(self) -> complex:
        return complex(self.e_r, -0.5 * self.gamma)

    def to_dict(self) -> dict:
        return {
            "e_r": self.e_r,
            "gamma": self.gamma,
            "residue": {"re": self.residue.real, "im": self.residue.imag},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResonancePole":
        try:
            res = data.get("residue", {"re": 1.0, "im": 0.0})
            return cls(float(data["e_r"]), float(data["gamma"]), complex(res["re"], res["im"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed pole description: {exc}") from None


def bw_amplitude(pole: ResonancePole, e) -> complex:
    """``r / (e - z_R)``."""
    e = complex(e)
    if e == pole.z:
        raise PoleEvaluationError(f"amplitude is singular at the pole z_R={pole.z}")
    return pole.residue / (e - pole.z)


def lineshape(pole: ResonancePole, e):
    """Lorentzian ``|r|^2 / ((e - E_R)^2 + (Gamma/2)^2)``; accepts arrays."""
    e = np.asarray(e, dtype=float)
    out = abs(pole.residue) ** 2 / ((e - pole.e_r) ** 2 + (0.5 * pole.gamma) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class GamowState:
    pole: ResonancePole
    wavefunction: SampledWaveFunction
    normalization: complex


def gamow_wavefunction(
    pole: ResonancePole, grid: EnergyGrid, coverage: float = 20.0
) -> GamowState:
    """Sample the normalized Breit-Wigner amplitude over a full-line grid.

    The normalization ``c = sqrt(Gamma / 2pi) / |r|`` gives the continuous
    amplitude ``c r / (E - z_R)`` unit norm on the real line; the sampled
    norm falls short only by the tail outside the window.
    """
    margin = min(grid.e_max - pole.e_r, pole.e_r - grid.e_min)
    if margin < coverage * pole.gamma:
        need = coverage * pole.gamma
        raise CoverageError(
            f"grid [{grid.e_min}, {grid.e_max}] must extend at least {need:g} "
            f"(= {coverage:g} Gamma) on both sides of E_R={pole.e_r:g}; "
            f"required width >= [{pole.e_r - need:g}, {pole.e_r + need:g}]"
        )
    if pole.residue == 0:
        raise InvalidInputError("a zero residue has no normalizable Gamow amplitude")
    c = math.sqrt(pole.gamma / (2.0 * math.pi)) / abs(pole.residue)
    values = c * pole.residue / (grid.points - pole.z)
    return GamowState(pole, SampledWaveFunction(grid, values), complex(c))


def gamow_evolution_factor(pole: ResonancePole, t: float) -> complex:
    """``exp(-i z_R t) = exp(-i E_R t) exp(-Gamma t / 2)`` for t >= 0."""
    if t < 0:
        raise SemigroupDomainError(t, "Gamow state evolution")
    return complex(np.exp(-1j * pole.z * t))


def survival_probability(pole: ResonancePole, t):
    """``exp(-Gamma t)``, pairing factor normalized to one."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise SemigroupDomainError(float(np.min(t_arr)), "survival probability")
    out = np.exp(-pole.gamma * t_arr)
    return float(out) if out.ndim == 0 else out


def gamow_pairing(
    psi: SampledWaveFunction, pole: ResonancePole, tol: float = DEFAULT_TOL
) -> complex:
    """``<psi|z_R>``: the boundary values ``conj(psi(E))`` continued to ``z_R``.

    ``conj(psi)`` must be a lower Hardy function (psi an admissible observable
    wave function).  See :data:`PAIRING_CONVENTION`.
    """
    bra = psi.conj()
    report = hardy_residual(bra, HalfPlane.LOWER, tol)
    if not report.passes:
        raise NotAnObservableError(
            f"conj(psi) is not in the lower Hardy class: forbidden mass "
            f"{report.forbidden_mass:.3g} > {tol:g}"
        )
    return evaluate_offaxis(bra, pole.z, HalfPlane.LOWER)


def lifetime(pole: ResonancePole) -> float:
    return 1.0 / pole.gamma


def lifetime_quadrature(pole: ResonancePole, cutoff: float | None = None) -> float:
    """Integrate the survival probability from 0 to ``cutoff`` (default 40/Gamma)."""
    if cutoff is None:
        cutoff = 40.0 / pole.gamma
    value, _ = integrate.quad(
        lambda t: math.exp(-pole.gamma * t), 0.0, cutoff, epsabs=0.0, epsrel=1e-13, limit=200
    )
    return value


# --------------------------------------------------------------------------
# lineshape fitting


@dataclass
class FitResult:
    pole: ResonancePole
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    params: dict
    names: tuple
    background: float = 0.0
    absolute_sigma: bool = True
    trace: list = field(default_factory=list, repr=False)

    @property
    def stderr(self) -> dict:
        return dict(zip(self.names, np.sqrt(np.diag(self.covariance))))

    def to_dict(self) -> dict:
        return {
            "pole": self.pole.to_dict(),
            "params": self.params,
            "stderr": {k: float(v) for k, v in self.stderr.items()},
            "parameter_order": list(self.names),
            "covariance": self.covariance.tolist(),
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "absolute_sigma": self.absolute_sigma,
        }


def _model(p, e):
    d = (e - p[0]) ** 2 + 0.25 * p[1] ** 2
    y = p[2] / d
    jac = np.empty((e.size, p.size))
    jac[:, 0] = 2.0 * p[2] * (e - p[0]) / d**2
    jac[:, 1] = -0.5 * p[2] * p[1] / d**2
    jac[:, 2] = 1.0 / d
    if p.size == 4:
        y = y + p[3]
        jac[:, 3] = 1.0
    return y, jac


def _initial_guess(e, y, background):
    base = float(np.min(y)) if background else 0.0
    k = int(np.argmax(y))
    peak = float(y[k]) - base
    half = base + 0.5 * peak

    def crossing(idx):
        for i0, i1 in zip(idx[:-1], idx[1:]):
            if y[i1] < half <= y[i0]:
                return e[i0] + (half - y[i0]) * (e[i1] - e[i0]) / (y[i1] - y[i0])
        return None

    left = crossing(np.arange(k, -1, -1))
    right = crossing(np.arange(k, e.size))
    if left is not None and right is not None:
        width = right - left
    elif left is not None:
        width = 2.0 * (e[k] - left)
    elif right is not None:
        width = 2.0 * (right - e[k])
    else:
        width = 0.1 * (e[-1] - e[0])
    width = max(width, 2.0 * float(np.min(np.diff(e))))
    p = [float(e[k]), width, peak * (0.5 * width) ** 2]
    if background:
        p.append(base)
    return np.array(p)


def fit_breit_wigner(
    energies,
    y,
    sigma=None,
    background: bool = False,
    max_iter: int = 200,
    gtol: float = 1e-10,
) -> FitResult:
    """Weighted Levenberg-Marquardt fit of a Lorentzian lineshape.

    Parameters are ``(E_R, Gamma, |r|^2[, background])``.  The stopping rule
    compares the gradient of ``chi^2/2``, scaled by the parameter magnitudes,
    with ``gtol``; a vanishing step is also accepted as convergence.

    Returns
    -------
    FitResult
        With ``covariance = (J^T W J)^-1`` at the optimum.  When ``sigma`` is
        omitted the covariance is rescaled by the reduced chi-square.

    Raises
    ------
    RankDeficiencyError
        Flat data or a singular normal matrix at the optimum.
    FitFailureError
        No convergence within ``max_iter`` iterations.
    """
    e = np.asarray(energies, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(e)
    e, y = e[order], y[order]
    if sigma is None:
        w = np.ones_like(y)
        absolute = False
    else:
        s = np.asarray(sigma, dtype=float)[order]
        if np.any(~(s > 0)):
            raise InvalidInputError("all sigma values must be positive")
        w = 1.0 / s
        absolute = True
    if e.size < 5:
        raise InvalidInputError(f"need at least 5 samples, got {e.size}")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(y))):
        raise InvalidInputError("samples must be finite")
    if np.any(np.diff(e) == 0):
        raise InvalidInputError("sample energies must be distinct")
    if np.any(y < 0):
        raise InvalidInputError("lineshape samples must be non-negative")
    if np.ptp(y) <= 1e-12 * max(abs(float(np.max(y))), 1e-300):
        raise RankDeficiencyError("flat data: no peak to fit")

    p = _initial_guess(e, y, background)
    names = ("e_r", "gamma", "r2") + (("background",) if background else ())

    def evaluate(params):
        model, jac = _model(params, e)
        r = (y - model) * w
        return r, jac * w[:, None]

    r, jac = evaluate(p)
    cost = float(r @ r)
    lam = 1e-3
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = jac.T @ r
        scaled_grad = np.max(np.abs(grad * np.maximum(np.abs(p), 1e-300)))
        trace.append({"iteration": it, "cost": cost, "lambda": lam, "grad": float(scaled_grad)})
        if scaled_grad <= gtol * max(cost, 1.0):
            converged = True
            break
        jtj = jac.T @ jac
        step_found = False
        while lam < 1e16:
            a = jtj + lam * np.diag(np.diag(jtj))
            try:
                step = np.linalg.solve(a, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            r_new, jac_new = evaluate(trial)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                small = np.all(np.abs(step) <= 1e-14 * np.maximum(np.abs(p), 1e-300))
                p, r, jac = trial, r_new, jac_new
                reduction = cost - cost_new
                cost = cost_new
                lam = max(lam / 10.0, 1e-12)
                step_found = True
                if small or reduction <= 1e-15 * max(cost, 1e-300):
                    converged = True
                break
            lam *= 10.0
        if converged:
            break
        if not step_found:
            # no descent direction left: accept only if already stationary
            converged = scaled_grad <= 1e-6 * max(cost, 1.0)
            break
    if not converged:
        raise FitFailureError(
            f"Levenberg-Marquardt did not converge in {max_iter} iterations", trace
        )

    jtj = jac.T @ jac
    if np.linalg.cond(jtj) > 1e14:
        raise RankDeficiencyError("normal matrix is singular at the optimum")
    cov = np.linalg.inv(jtj)
    dof = e.size - p.size
    if not absolute:
        cov = cov * (cost / dof if dof > 0 else 1.0)
    p[1] = abs(p[1])
    if p[2] <= 0:
        raise FitFailureError("fitted peak area |r|^2 is not positive", trace)
    pole = ResonancePole(p[0], p[1], math.sqrt(p[2]))
    params = dict(zip(names, map(float, p)))
    return FitResult(
        pole=pole,
        covariance=cov,
        residual_norm=math.sqrt(cost),
        iterations=it,
        params=params,
        names=names,
        background=float(p[3]) if background else 0.0,
        absolute_sigma=absolute,
        trace=trace,
    )
