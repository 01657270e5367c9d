"""Asymptotic tail completion for functions sampled on a finite energy window.

Rational amplitudes such as ``r/(E - z)`` decay only like ``1/E``; cutting
them off at the window edge produces a ``1/tau`` leakage in the Fourier
domain that swamps any one-sided-support test.  The samples near the two
edges are fitted with

    Phi(E) = exp(-i x s) * sum_j c_j * R_j(x),    x = E - center,
    R_j(x) = ((x - i k)**-j + (x + i k)**-j) / 2,

whose Fourier transform, full-line integral and Cauchy integral are known in
closed form.  ``G - Phi`` decays like ``x**-(order+1)`` and is handled by
ordinary quadrature; ``Phi`` is added back analytically.  ``R_j`` is even in
its half-plane content, so the completion does not bias a Hardy test toward
either half-plane.  ``s`` (the tail phase slope, i.e. an accumulated time
translation) is found by variable projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _basis(x, order, kappa):
    cols = [0.5 * ((x - 1j * kappa) ** -j + (x + 1j * kappa) ** -j) for j in range(1, order + 1)]
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class AlgebraicTail:
    coeffs: np.ndarray
    kappa: float
    center: float
    phase_time: float

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def values(self, energies):
        x = np.asarray(energies, dtype=float) - self.center
        return np.exp(-1j * x * self.phase_time) * (_basis(x, self.order, self.kappa) @ self.coeffs)

    def fourier(self, tau):
        """``(1/sqrt(2pi)) * int dE exp(i E tau) Phi(E)`` evaluated exactly."""
        tau = np.asarray(tau, dtype=float)
        sigma = tau - self.phase_time
        out = np.zeros(tau.shape, dtype=complex)
        decay = np.exp(-self.kappa * np.abs(sigma))
        side = np.sign(sigma)  # 0 at sigma == 0 gives the principal value
        for j, c in enumerate(self.coeffs, start=1):
            if c == 0:
                continue
            # half of +-2 pi i (i sigma)^(j-1) e^{-k|sigma|} / (j-1)!, divided by sqrt(2 pi)
            term = 1j * math.pi * (1j * sigma) ** (j - 1) / math.factorial(j - 1) * decay * side
            out += c * term / SQRT_2PI
        return out * np.exp(1j * self.center * tau)

    def integral(self) -> complex:
        """Full-line integral (symmetric limit for the ``1/E`` term)."""
        return complex(SQRT_2PI * self.fourier(np.array([0.0]))[0])

    def cauchy(self, w: complex) -> complex:
        """``int dE Phi(E) / (E - w)`` over the whole real line, ``Im w != 0``."""
        w = complex(w) - self.center
        s = self.phase_time
        total = 0j
        for j, c in enumerate(self.coeffs, start=1):
            if c == 0:
                continue
            part = 0j
            for alpha in (1j * self.kappa, -1j * self.kappa):
                part += 0.5 * _cauchy_power(alpha, j, s, w)
            total += c * part
        return total


def _cauchy_power(alpha, j, s, w):
    """``int dx exp(-i x s) (x - alpha)**-j / (x - w)`` by residues."""
    close_lower = s >= 0
    residues = 0j
    if (w.imag < 0) == close_lower:
        residues += np.exp(-1j * w * s) * (w - alpha) ** -j
    if (alpha.imag < 0) == close_lower:
        acc = 0j
        for m in range(j):
            acc += (-1j * s) ** m / math.factorial(m) * (-1) ** (j - 1 - m) * (alpha - w) ** -(j - m)
        residues += np.exp(-1j * alpha * s) * acc
    return -2j * math.pi * residues if close_lower else 2j * math.pi * residues


def fit_tail(energies, values, order=4, edge_fraction=0.2, kappa=None) -> AlgebraicTail:
    """Fit the algebraic tail model to the outer ``edge_fraction`` of each edge."""
    energies = np.asarray(energies, dtype=float)
    values = np.asarray(values, dtype=complex)
    center = 0.5 * (energies[0] + energies[-1])
    half = 0.5 * (energies[-1] - energies[0])
    if kappa is None:
        kappa = half / 40.0
    x = energies - center
    mask = np.abs(x) >= (1.0 - edge_fraction) * half
    xm, gm = x[mask], values[mask]
    if order == 0 or not np.any(gm):
        return AlgebraicTail(np.zeros(order, dtype=complex), kappa, center, 0.0)

    scale = half ** np.arange(1, order + 1)
    base = _basis(xm, order, kappa) * scale

    def solve(s):
        a = base * np.exp(-1j * xm * s)[:, None]
        c, *_ = np.linalg.lstsq(a, gm, rcond=None)
        return c, np.linalg.norm(a @ c - gm)

    seed = _phase_slope_seed(xm, gm)
    width = edge_fraction * half
    res = minimize_scalar(
        lambda s: solve(s)[1],
        bounds=(seed - math.pi / width, seed + math.pi / width),
        method="bounded",
        options={"xatol": 1e-13 * max(1.0, abs(seed))},
    )
    s = float(res.x)
    c, r = solve(s)
    c0, r0 = solve(seed)
    if r0 < r:
        s, c = seed, c0
    return AlgebraicTail(c * scale, float(kappa), float(center), s)


def _phase_slope_seed(x, g):
    slopes = []
    for side in (x < 0, x > 0):
        if np.count_nonzero(side) < 2:
            continue
        phase = np.unwrap(np.angle(g[side]))
        slopes.append(np.polyfit(x[side], phase, 1)[0])
    return -float(np.mean(slopes)) if slopes else 0.0
