"""Disk-kernel approximate solutions and almost analytic extensions.

The device: average the truncated formal solution over a bump-weighted disk
of complex times z = t + |t| w, |w| <= epsilon, truncating the series at
each node at the index N((1+epsilon) C |z|) dictated by the weight
sequence.  The average reproduces polynomials in t exactly (radial symmetry
kills every positive moment), and the per-node truncation turns the series
divergence into flatness: the field applied to the result decays like the
associated function h(Q|t|) as t -> 0.

Specialized to the field d/dt - i d/dx this builds almost analytic
extensions U(x + it) of one-variable data, with dbar U = (i/2) L U flat to
the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_legendre

from .errors import (ArityMismatch, FitFailed, GuardExceeded,
                     QuadratureTooCoarse)
from .jets import (EvalBox, FormalSeries, VectorFieldJet, _snap_up,
                   formal_solution, growth_fit, jet_constant, jet_eval)
from .weights import WeightSequence, assoc, bigN_capped


# ---------------------------------------------------------------------------
# the disk kernel

def _bump_profile(s):
    """exp(-1/(1-s)) for s < 1, else 0; s = |w|^2/eps^2."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    with np.errstate(under="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
    return out


@dataclass(eq=False)
class DiskKernel:
    epsilon: float
    n_r: int
    n_theta: int
    nodes: np.ndarray        # complex w_i, flattened product grid
    weights: np.ndarray      # area weight times normalized bump at w_i
    norm: float
    residual: float          # |moment_0 - 1| + sum of low moment magnitudes


def make_kernel(epsilon: float = 0.5, n_r: int = 64, n_theta: int = 64,
                tol: float = 1e-10) -> DiskKernel:
    """Gauss-Legendre (radius) x trapezoid (angle) nodes on |w| <= epsilon
    with the normalized bump weight.

    The residual tracks how well the discrete measure integrates to one and
    kills the first four moments; both are required to tol, otherwise the
    grid cannot reproduce polynomials and we refuse it.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    xg, wg = roots_legendre(n_r)
    rr = 0.5 * epsilon * (xg + 1.0)
    wr = 0.5 * epsilon * wg

    ref, _ = quad(lambda r: np.exp(-1.0 / (1.0 - (r / epsilon) ** 2)) * r,
                  0.0, epsilon, epsabs=1e-15, epsrel=1e-13, limit=200)
    norm = 1.0 / (2.0 * np.pi * ref)

    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    w_theta = 2.0 * np.pi / n_theta

    nodes = (rr[:, None] * np.exp(1j * theta)[None, :]).ravel()
    psi = norm * _bump_profile((rr / epsilon) ** 2)
    weights = (wr * rr * psi)[:, None].repeat(n_theta, axis=1).ravel() * w_theta

    moments = np.array([np.sum(weights * nodes ** k) for k in range(5)])
    residual = float(abs(moments[0] - 1.0) + np.sum(np.abs(moments[1:])))
    if residual > tol:
        raise QuadratureTooCoarse(
            f"kernel moment residual {residual:.3g} exceeds {tol:.3g} "
            f"at n_r={n_r}, n_theta={n_theta}")
    return DiskKernel(epsilon, n_r, n_theta, nodes, weights, norm, residual)


def bump_value(kernel: DiskKernel, w):
    """The normalized bump at complex w (vanishes for |w| >= epsilon)."""
    s = np.abs(np.asarray(w, dtype=complex)) ** 2 / kernel.epsilon ** 2
    out = kernel.norm * _bump_profile(s)
    return float(out) if np.ndim(w) == 0 else out


def kernel_apply_poly(kernel: DiskKernel, coeffs, t: float) -> complex:
    """Average a polynomial sum c_k z^k over the disk z = t + |t| w.

    Radial symmetry integrates every positive power of w to zero, so the
    result is p(t) up to the kernel residual.
    """
    z = t + abs(t) * kernel.nodes
    vals = np.polyval(np.asarray(coeffs, dtype=complex)[::-1], z)
    return complex(np.sum(kernel.weights * vals))


# ---------------------------------------------------------------------------
# approximate solutions

@dataclass(eq=False)
class ApproxSolution:
    """Disk-kernel average of a formal solution, valid for |t| <= delta.

    C_star is the geometric growth factor of the coefficient sups (from
    growth_fit or prior knowledge); it sets both the per-node truncation
    radius and the validity radius delta = 1/((1+eps)^2 C_star).
    """
    series: FormalSeries
    seq: WeightSequence
    kernel: DiskKernel
    C_star: float
    delta: float = field(init=False)

    def __post_init__(self):
        if self.C_star <= 0.0:
            raise ValueError("C_star must be positive")
        if self.seq.K_max < self.series.n_max:
            raise ValueError(
                f"sequence table K_max={self.seq.K_max} shorter than the "
                f"series length {self.series.n_max}")
        eps = self.kernel.epsilon
        self.delta = 1.0 / ((1.0 + eps) ** 2 * self.C_star)

    def truncation_indices(self, t: float):
        """Per-node truncation K_i = min(N((1+eps) C |z_i|), n_max)."""
        z = t + abs(t) * self.kernel.nodes
        r = (1.0 + self.kernel.epsilon) * self.C_star * np.abs(z)
        return z, bigN_capped(self.seq, r, self.series.n_max)

    def evaluate(self, x, t: float):
        """u(x, t) = sum_i W_i sum_{k <= K_i} u_k(x) z_i^k, factored through
        the moment sums G_k = sum_{K_i >= k} W_i z_i^k."""
        t = float(t)
        if abs(t) > self.delta * (1.0 + 1e-12):
            raise ValueError(
                f"|t|={abs(t):.6g} beyond the validity radius delta={self.delta:.6g}")
        u = self.series.u
        if t == 0.0:
            return jet_eval(u[0], x=x)
        z, K = self.truncation_indices(t)
        W = self.kernel.weights
        G = np.zeros(self.series.n_max + 1, dtype=complex)
        zp = np.ones_like(z)
        for k in range(self.series.n_max + 1):
            keep = K >= k
            if not np.any(keep):
                break
            G[k] = np.sum(W[keep] * zp[keep])
            zp = zp * z
        out = None
        for k in range(self.series.n_max + 1):
            if G[k] == 0.0:
                continue
            term = jet_eval(u[k], x=x) * G[k]
            out = term if out is None else out + term
        if out is None:
            out = jet_eval(u[0], x=x) * 0.0
        return out


def apply_L_numeric(sol: ApproxSolution, x, t: float, dx: float = 1e-4,
                    dt: float | None = None):
    """Central-difference application of the field to the averaged solution.

    The time step is capped at 0.45 (delta - |t|) so both stencil points
    stay inside the validity region.
    """
    fld = sol.series.field
    if fld.n_zeta:
        raise ArityMismatch("numeric field application needs zeta-free jets")
    if isinstance(x, (list, tuple)):
        xs = [np.asarray(xi, dtype=float) for xi in x]
    else:
        xs = [np.asarray(x, dtype=float)]
    if len(xs) != fld.n_x:
        raise ArityMismatch(f"need {fld.n_x} x components, got {len(xs)}")
    cap = 0.45 * (sol.delta - abs(t))
    if cap <= 0.0:
        raise ValueError("t at or beyond the validity radius, no room to difference")
    ht = min(dt, cap) if dt is not None else min(1e-4 * (1.0 + abs(t)), cap)

    def ev(xlist, tv):
        return np.asarray(sol.evaluate(xlist if fld.n_x > 1 else xlist[0], tv))

    out = (ev(xs, t + ht) - ev(xs, t - ht)) / (2.0 * ht)
    for i, ai in enumerate(fld.a):
        xp = [xi + (dx if j == i else 0.0) for j, xi in enumerate(xs)]
        xm = [xi - (dx if j == i else 0.0) for j, xi in enumerate(xs)]
        dudx = (ev(xp, t) - ev(xm, t)) / (2.0 * dx)
        out = out + jet_eval(ai, x=xs if fld.n_x > 1 else xs[0]) * dudx
    return out


# ---------------------------------------------------------------------------
# flatness fitting

_Q_GRID = 2.0 ** (0.5 * np.arange(-4, 17))        # 1/4 .. 256, half-power steps


@dataclass
class FlatnessFit:
    Q: float
    A: float
    sup_ratio: float         # max sup / (A h(Q|t|)), <= 1 by construction
    t: np.ndarray
    sup: np.ndarray
    h: np.ndarray            # h(Q|t|) at the chosen Q
    skipped_Q: list


def flatness_fit(t_values, sup_values, seq: WeightSequence, q_grid=None,
                 a_cap: float = 2.0 ** 16) -> FlatnessFit:
    """Fit sup(t) <= A h(Q|t|) over a Q grid, A snapped to quarter powers.

    Larger Q only helps (h is nondecreasing), so with A floored at 1 the
    minimal snapped A is attained on a tail of the grid; we report the
    smallest Q attaining it.  Q values whose h evaluation is uncertified
    (table guard) or underflows below a positive sup are skipped; if every
    Q is skipped or needs A beyond a_cap, the fit fails.
    """
    t = np.abs(np.asarray(t_values, dtype=float))
    sup = np.asarray(sup_values, dtype=float)
    if t.shape != sup.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("need matching one-dimensional t and sup arrays")
    if np.any(t <= 0.0):
        raise ValueError("flatness is measured at t != 0")
    q_grid = _Q_GRID if q_grid is None else np.asarray(q_grid, dtype=float)

    best = None
    skipped = []
    for Q in q_grid:
        try:
            hv = np.atleast_1d(assoc(seq, "h", Q * t))
        except GuardExceeded:
            skipped.append(float(Q))
            continue
        if np.any((hv == 0.0) & (sup > 0.0)):
            skipped.append(float(Q))
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(sup > 0.0, sup / hv, 0.0)
        a_raw = float(np.max(ratios))
        A = 0.0 if a_raw == 0.0 else _snap_up(a_raw)
        if A > a_cap:
            skipped.append(float(Q))
            continue
        if best is None or (A, Q) < (best.A, best.Q):
            ratio = 0.0 if A == 0.0 else a_raw / A
            best = FlatnessFit(float(Q), A, ratio, t, sup, hv, [])
    if best is None:
        raise FitFailed(
            f"no Q in [{q_grid[0]:.3g}, {q_grid[-1]:.3g}] admits a certified "
            f"fit below A={a_cap:.3g}")
    best.skipped_Q = skipped
    return best


def measure_flatness(sol: ApproxSolution, x_values, t_values,
                     factor: float = 1.0, dx: float = 1e-4, q_grid=None,
                     a_cap: float = 2.0 ** 16) -> FlatnessFit:
    """Fit the decay of sup_x |L u(x, t)| (times factor) against h(Q|t|)."""
    sups = []
    for tv in t_values:
        lu = apply_L_numeric(sol, x_values, float(tv), dx=dx)
        sups.append(factor * float(np.max(np.abs(lu))))
    return flatness_fit(t_values, sups, sol.seq, q_grid=q_grid, a_cap=a_cap)


# ---------------------------------------------------------------------------
# almost analytic extension

def almost_analytic_extend(f, seq: WeightSequence, kernel: DiskKernel,
                           z_values, n_max: int = 12,
                           C_star: float | None = None, growth_box=None):
    """Extend one-variable data f off the real axis through the disk-kernel
    average of the formal solution of d/dt - i d/dx.

    Returns (values, sol): U evaluated at the given complex points (Re z is
    the spatial variable, Im z the time), and the ApproxSolution for
    further probing.  dbar U = (i/2) (d/dt - i d/dx) U, so the extension's
    dbar decay is factor-1/2 the field decay that measure_flatness fits.
    """
    if f.n_x != 1 or f.n_zeta != 0:
        raise ArityMismatch("extension is defined for one real variable")
    mi = jet_constant(-1j, 1, 0, f.degree, f.base_x, f.base_zeta)
    L = VectorFieldJet(a=[mi], b=[])
    series = formal_solution(L, f, min(n_max, f.degree))

    z = np.asarray(z_values, dtype=complex)
    zf = z.ravel()
    if C_star is None:
        lo = float(zf.real.min()) - 0.5
        hi = float(zf.real.max()) + 0.5
        box = growth_box if growth_box is not None else EvalBox([(lo, hi)])
        C_star = growth_fit(series, seq, box).C_fit
    sol = ApproxSolution(series, seq, kernel, C_star)

    out = np.empty(zf.shape, dtype=complex)
    for tv in np.unique(zf.imag):
        m = zf.imag == tv
        out[m] = np.atleast_1d(sol.evaluate(zf.real[m], float(tv)))
    return out.reshape(z.shape), sol
