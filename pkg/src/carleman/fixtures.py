"""Reference functions, grids, and closed forms used across tests and the
acceptance battery.

Everything here is deterministic; grids are built on demand.
"""

from __future__ import annotations

import numpy as np
from scipy.special import dawsn

from .fbi import GridFunction


def smooth_step(s):
    """C-infinity cutoff in one scalar: 1 for s <= 1/2, 0 for s >= 1,
    strictly decreasing between."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        a = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
        b = np.where(s > 0.5, np.exp(-1.0 / np.maximum(s - 0.5, 1e-300)), 0.0)
    out = a / (a + b + (a + b == 0.0))
    out = np.where(s <= 0.5, 1.0, out)
    out = np.where(s >= 1.0, 0.0, out)
    return out


def radial_cutoff(*coords, radius: float = 1.0):
    """smooth_step of |y|/radius; 1 inside radius/2, 0 outside radius."""
    r = np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in coords))
    return smooth_step(r / radius)


# ---------------------------------------------------------------------------
# one-dimensional profiles with closed-form transforms

def gaussian_grid(n: int = 2048, half_width: float = 8.0) -> GridFunction:
    return GridFunction.from_function(lambda y: np.exp(-y * y),
                                      [-half_width], [half_width], n)


def gaussian_fbi_closed_form(x: float, xi: float) -> complex:
    """F[e^{-y^2}](x, xi) = sqrt(pi/(1+lam)) exp((2x+i xi)^2/(4(1+lam)) - x^2).

    Substituting v = x - y turns the exponent into
    -(1+lam) v^2 + v (2x + i xi) - x^2 and the Gaussian integral closes.
    """
    lam = abs(xi)
    w = 2.0 * x + 1j * xi
    return (np.sqrt(np.pi / (1.0 + lam))
            * np.exp(w * w / (4.0 * (1.0 + lam)) - x * x))


def sign_grid(n: int = 2048, half_width: float = 8.0) -> GridFunction:
    return GridFunction.from_function(np.sign, [-half_width], [half_width], n)


def sign_fbi_closed_form(xi: float) -> complex:
    """F[sign](0, xi) = -2i dawsn(xi / (2 sqrt(lam))) / sqrt(lam)."""
    lam = abs(xi)
    return -2j * dawsn(xi / (2.0 * np.sqrt(lam))) / np.sqrt(lam)


def pole_grid(n: int = 2048, half_width: float = 8.0,
              offset: float = 0.05) -> GridFunction:
    """Boundary value of 1/(y + i offset): holomorphic in the lower half
    plane, singular at y = 0 from above."""
    return GridFunction.from_function(lambda y: 1.0 / (y + 1j * offset),
                                      [-half_width], [half_width], n)


# ---------------------------------------------------------------------------
# two-dimensional scan fixtures

def conormal_grid(n: int = 2752) -> GridFunction:
    """|y1 - y2|^3 times a radial cutoff: smooth off the diagonal, C^2 but
    no better across it; wave front conormal to {y1 = y2}."""
    def fn(y1, y2):
        return np.abs(y1 - y2) ** 3 * radial_cutoff(y1, y2)
    return GridFunction.from_function(fn, [-1.0, -1.0], [1.0, 1.0], n)


def holomorphic_grid(n: int = 2752) -> GridFunction:
    """e^{y1 + i y2} times the same cutoff: entire amplitude, empty wave
    front over the inner half of the box."""
    def fn(y1, y2):
        return np.exp(y1 + 1j * y2) * radial_cutoff(y1, y2)
    return GridFunction.from_function(fn, [-1.0, -1.0], [1.0, 1.0], n)


def conormal_covectors() -> np.ndarray:
    """Unit conormals of the diagonal {y1 = y2}."""
    v = np.array([1.0, -1.0]) / np.sqrt(2.0)
    return np.array([v, -v])


# ---------------------------------------------------------------------------
# complex traces for phase bounds

def upper_trace(x: float, t_values) -> np.ndarray:
    """Z(t) = x + i t."""
    return x + 1j * np.asarray(t_values, dtype=float)


def lower_trace(x: float, t_values) -> np.ndarray:
    return x - 1j * np.asarray(t_values, dtype=float)


def flat_trace(x: float, t_values) -> np.ndarray:
    return x + 0j * np.asarray(t_values, dtype=float)
