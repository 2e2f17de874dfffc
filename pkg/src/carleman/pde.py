"""Quasilinear first-order model, linearization, characteristic geometry.

The equation is du/dt = f(x, u, grad u) with f given as a jet (and
optionally a vectorized callable) in (x_1..x_n, zeta_0, zeta_1..zeta_n),
zeta_0 standing for u and zeta_j for du/dx_j.  Along a solution u the
relevant operator is the linearization

    L^u = d/dt - sum_j f_zeta_j(x, u, grad u) d/dx_j,

whose characteristic covectors, Hamiltonian lift to the zeta slots, and
angular reduction are computed here, together with utilities that certify
sampled solutions and recover transport coefficients from complex traces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import (ArityMismatch, CharacteristicDirection, SingularJacobian,
                     TrustBoxExceeded)
from .fbi import GridFunction, ScanConfig, ScanReport, wavefront_scan
from .fixtures import radial_cutoff
from .jets import Jet, VectorFieldJet, _apply_coeffs, jet_add, jet_diff, \
    jet_eval, jet_mul, jet_scale, jet_variable
from .weights import WeightSequence


# ---------------------------------------------------------------------------
# the model and sampled solutions

@dataclass(eq=False)
class RhsModel:
    """Right side f(x, zeta_0, zeta_1..zeta_n) of du/dt = f(x, u, grad u).

    jet carries the exact Taylor data; fn, when given, must agree with it
    on the sampling box (jet evaluation is the fallback).  trust_radius
    bounds |u| and |grad u| values the model is trusted on.
    """
    jet: Jet
    fn: object = None
    trust_radius: float = np.inf

    def __post_init__(self):
        if self.jet.n_zeta != self.jet.n_x + 1:
            raise ArityMismatch(
                f"f needs n_x + 1 = {self.jet.n_x + 1} zeta slots "
                f"(u and its gradient), got {self.jet.n_zeta}")

    @property
    def n_x(self) -> int:
        return self.jet.n_x

    def eval(self, x, zeta):
        if self.fn is not None:
            return self.fn(x, *zeta)
        return jet_eval(self.jet, x=x, zeta=zeta)

    def zeta_gradient_at(self, x, zeta) -> np.ndarray:
        """(f_zeta_1, .., f_zeta_n) at a point; the transport symbol a_0."""
        out = [jet_eval(jet_diff(self.jet, self.jet.n_x + 1 + j), x=x,
                        zeta=zeta) for j in range(self.n_x)]
        return np.asarray(out, dtype=complex)


@dataclass(eq=False)
class SolutionSamples:
    """u sampled on a uniform (x, t) product grid, one spatial variable.

    Central differences on the interior supply du/dx and du/dt; residual
    measures how well the samples satisfy the model.  fn is kept so other
    machinery can resample the same solution at its own resolution.
    """
    fn: object
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray

    @classmethod
    def from_function(cls, fn, x_lo, x_hi, n_x, t_lo, t_hi, n_t):
        x = np.linspace(x_lo, x_hi, n_x)
        t = np.linspace(t_lo, t_hi, n_t)
        u = np.asarray(fn(x[:, None], t[None, :]), dtype=complex)
        return cls(fn, x, t, u)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def interior(self):
        """x grid, u, du/dx, du/dt on the interior points."""
        u = self.u
        ui = u[1:-1, 1:-1]
        ux = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2.0 * self.dx)
        ut = (u[1:-1, 2:] - u[1:-1, :-2]) / (2.0 * self.dt)
        return self.x[1:-1], ui, ux, ut

    def residual(self, model: RhsModel) -> float:
        xi, ui, ux, ut = self.interior()
        reach = max(float(np.max(np.abs(ui))), float(np.max(np.abs(ux))))
        if reach > model.trust_radius:
            raise TrustBoxExceeded(
                f"samples reach |zeta| ~ {reach:.3g} beyond the trusted "
                f"radius {model.trust_radius:.3g}")
        fv = model.eval(xi[:, None] + 0.0 * ui.real, [ui, ux])
        fv = np.broadcast_to(np.asarray(fv, dtype=complex), ut.shape)
        return float(np.max(np.abs(ut - fv)))

    def certify(self, model: RhsModel, tol: float = 1e-6) -> float:
        res = self.residual(model)
        if res > tol:
            raise ValueError(
                f"sampled solution misses the model by {res:.3g} > {tol:.3g}")
        return res


def linearize(model: RhsModel, samples: SolutionSamples):
    """Transport coefficient grids a_j = f_zeta_j(x, u, du/dx) on the
    interior of the sample grid; the linearized operator is
    d/dt - sum_j a_j d/dx_j."""
    xi, ui, ux, _ = samples.interior()
    reach = max(float(np.max(np.abs(ui))), float(np.max(np.abs(ux))))
    if reach > model.trust_radius:
        raise TrustBoxExceeded(
            f"samples reach |zeta| ~ {reach:.3g} beyond the trusted "
            f"radius {model.trust_radius:.3g}")
    xg = xi[:, None] + 0.0 * ui.real
    grids = []
    for j in range(model.n_x):
        dj = jet_diff(model.jet, model.jet.n_x + 1 + j)
        val = np.asarray(jet_eval(dj, x=xg, zeta=[ui, ux]), dtype=complex)
        grids.append(np.broadcast_to(val, ui.shape).copy())
    return grids


# ---------------------------------------------------------------------------
# characteristic set

@dataclass
class CharSet:
    """Characteristic covectors (tau, xi) of d/dt - sum a0_j d/dx_j as the
    null space of explicit linear constraints on R^{1+n}."""
    a0: np.ndarray
    convention: str
    constraints: np.ndarray
    basis: np.ndarray            # orthonormal columns spanning the set

    def distance(self, covector) -> float:
        v = np.asarray(covector, dtype=float)
        if self.basis.shape[1] == 0:
            return float(np.linalg.norm(v))
        proj = self.basis @ (self.basis.T @ v)
        return float(np.linalg.norm(v - proj))

    def contains(self, covector, tol: float = 1e-9) -> bool:
        return self.distance(covector) <= tol


def char_set(a0, convention: str = "split") -> CharSet:
    """tau = Re a0 . xi and Im a0 . xi = 0 ("split", the default), or
    tau = -Re a0 . xi under the "paper" sign convention."""
    a0 = np.atleast_1d(np.asarray(a0, dtype=complex))
    n = a0.size
    if convention == "split":
        row_re = np.concatenate([[1.0], -a0.real])
    elif convention == "paper":
        row_re = np.concatenate([[1.0], a0.real])
    else:
        raise ValueError(f"unknown convention {convention!r}")
    row_im = np.concatenate([[0.0], a0.imag])
    constraints = np.vstack([row_re, row_im])
    basis = null_space(constraints)
    return CharSet(a0, convention, constraints, basis)


def theta_reduce(a0, tau: float, xi, tol: float = 1e-9):
    """Angle minimizing g(theta) = cos(theta) Im a0.xi
    + sin(theta) (Re a0.xi + tau); returns (theta, min value).

    g is R cos(theta - phi0); a covector with R ~ 0 admits no minimizing
    angle and raises.
    """
    a0 = np.atleast_1d(np.asarray(a0, dtype=complex))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != a0.size:
        raise ArityMismatch("xi length does not match the symbol")
    re_part = float(a0.real @ xi) + float(tau)
    im_part = float(a0.imag @ xi)
    R = float(np.hypot(re_part, im_part))
    if R <= tol:
        raise CharacteristicDirection(
            "covector is characteristic for the angular reduction; "
            "g vanishes identically")
    phi0 = np.arctan2(re_part, im_part)
    theta = float(np.mod(phi0 + np.pi, 2.0 * np.pi))
    return theta, -R


# ---------------------------------------------------------------------------
# the Hamiltonian lift

def hamiltonian_lift(model: RhsModel) -> VectorFieldJet:
    """Vector field on (x, zeta_0, zeta) whose flow transports the jet of
    (u, grad u) along the linearization:

        H = d/dt - sum_j f_zeta_j d/dx_j + h_0 d/dzeta_0 + sum_j h_j d/dzeta_j
        h_0 = f - sum_j zeta_j f_zeta_j,   h_j = f_x_j + zeta_j f_zeta_0.
    """
    f = model.jet
    n = model.n_x
    a = [jet_scale(jet_diff(f, n + 1 + j), -1.0) for j in range(n)]
    h0 = f
    for j in range(n):
        zj = jet_variable(n + 1 + j, f.n_x, f.n_zeta, f.degree,
                          f.base_x, f.base_zeta)
        h0 = jet_add(h0, jet_scale(jet_mul(zj, jet_diff(f, n + 1 + j)), -1.0))
    b = [h0]
    fz0 = jet_diff(f, n)
    for j in range(n):
        zj = jet_variable(n + 1 + j, f.n_x, f.n_zeta, f.degree,
                          f.base_x, f.base_zeta)
        b.append(jet_add(jet_diff(f, j), jet_mul(zj, fz0)))
    return VectorFieldJet(a=a, b=b)


def hamiltonian_apply(H: VectorFieldJet, phi: Jet) -> Jet:
    """H applied to a time-independent observable, as a jet."""
    return _apply_coeffs(H, phi)


@dataclass
class ChainIdentityReport:
    steps: list
    errors: list                 # max interior |L^w(phi o w) - (H phi) o w|
    ratios: list                 # consecutive error ratios, ~4 at 2nd order


def chain_identity_check(model: RhsModel, u_fn, phi: Jet, x_box=(-0.5, 0.5),
                         t_box=(-0.2, 0.2), steps=(0.02, 0.01),
                         ux_fn=None, anisotropy: float = 1.0) -> ChainIdentityReport:
    """Check L^u(phi(x, u, grad u)) = (H phi)(x, u, grad u) by finite
    differences against the exact jet computation, one spatial variable.

    u_fn(x, t) must solve the model on the box; ux_fn defaults to a central
    difference of u_fn.  Second order in the step when the composite is
    curved, identically small when it is affine.  anisotropy scales the x
    step relative to the t step; matched steps make the two difference
    quotients of a wave profile g(x + t) read the same table twice and
    cancel exactly, so a value below 1 keeps the truncation error visible.
    """
    if model.n_x != 1:
        raise ArityMismatch("the identity check covers one spatial variable")
    hphi = _apply_coeffs(hamiltonian_lift(model), phi)
    fz = jet_diff(model.jet, 2)

    if ux_fn is None:
        def ux_fn(x, t, _h=1e-6):
            return (u_fn(x + _h, t) - u_fn(x - _h, t)) / (2.0 * _h)

    errors = []
    for h in steps:
        hx = anisotropy * h
        x = np.arange(x_box[0], x_box[1] + 0.5 * hx, hx)
        t = np.arange(t_box[0], t_box[1] + 0.5 * h, h)
        xg = x[:, None] + 0.0 * t[None, :]
        u = np.asarray(u_fn(x[:, None], t[None, :]), dtype=complex)
        ux = np.asarray(ux_fn(x[:, None], t[None, :]), dtype=complex)

        def on_w(jet):
            val = np.asarray(jet_eval(jet, x=xg, zeta=[u, ux]), dtype=complex)
            return np.broadcast_to(val, xg.shape)

        phi_w = on_w(phi)
        dphi_t = (phi_w[1:-1, 2:] - phi_w[1:-1, :-2]) / (2.0 * h)
        dphi_x = (phi_w[2:, 1:-1] - phi_w[:-2, 1:-1]) / (2.0 * hx)
        lhs = dphi_t - on_w(fz)[1:-1, 1:-1] * dphi_x
        rhs = on_w(hphi)[1:-1, 1:-1]
        errors.append(float(np.max(np.abs(lhs - rhs))))
    ratios = [e0 / e1 for e0, e1 in zip(errors, errors[1:]) if e1 > 0.0]
    return ChainIdentityReport(list(steps), errors, ratios)


# ---------------------------------------------------------------------------
# transport coefficients from complex traces

def renormalize(z_samples, dx: float, dt: float,
                cond_cap: float = 1e6) -> np.ndarray:
    """Recover b in Z_t + b Z_x = 0 from samples of Z on an (x, t) grid by
    central differences: b = -Z_t / Z_x on the interior.

    A trace transported by d/dt + b d/dx returns the coefficient field b
    itself.  A spatial derivative whose magnitude vanishes or varies by
    more than cond_cap leaves the division ill-posed and raises.
    """
    z = np.asarray(z_samples, dtype=complex)
    if z.ndim != 2 or min(z.shape) < 3:
        raise ValueError("need a 2d sample grid with at least 3 points per axis")
    zx = (z[2:, 1:-1] - z[:-2, 1:-1]) / (2.0 * dx)
    zt = (z[1:-1, 2:] - z[1:-1, :-2]) / (2.0 * dt)
    mags = np.abs(zx)
    if np.min(mags) == 0.0 or np.max(mags) / np.min(mags) > cond_cap:
        raise SingularJacobian(
            "spatial derivative of the trace is singular on the box")
    return -zt / zx


# ---------------------------------------------------------------------------
# the inclusion experiment

@dataclass
class WfInclusionReport:
    scan: ScanReport
    a0: np.ndarray
    covectors: np.ndarray        # (n_singular, 2) rows (tau, xi)
    distances: np.ndarray
    step: float
    included: np.ndarray


def wf_inclusion_experiment(model: RhsModel, samples: SolutionSamples,
                            seq: WeightSequence, base=(0.0, 0.0),
                            radius: float = 1.0, n: int = 2752,
                            config: ScanConfig | None = None,
                            convention: str = "split") -> WfInclusionReport:
    """Scan the solution as a function of spacetime around a base point and
    test every singular covector against the characteristic set of the
    linearization there.

    The grid axes are (x, t), so a scan direction omega maps to the
    covector (tau, xi) = (omega_2, omega_1).  Inclusion holds when the
    distance to Char does not exceed the angular step of the fan.
    """
    if model.n_x != 1:
        raise ArityMismatch("the experiment covers one spatial variable")
    x0, t0 = float(base[0]), float(base[1])

    def windowed(xv, tv):
        return (np.asarray(samples.fn(xv, tv), dtype=complex)
                * radial_cutoff(xv - x0, tv - t0, radius=radius))

    gf = GridFunction.from_function(windowed, [x0 - radius, t0 - radius],
                                    [x0 + radius, t0 + radius], n)
    scan = wavefront_scan(gf, [x0, t0], seq, config)

    h = 1e-5
    u0 = complex(np.asarray(samples.fn(x0, t0), dtype=complex))
    ux0 = complex((np.asarray(samples.fn(x0 + h, t0), dtype=complex)
                   - np.asarray(samples.fn(x0 - h, t0), dtype=complex))
                  / (2.0 * h))
    if max(abs(u0), abs(ux0)) > model.trust_radius:
        raise TrustBoxExceeded("base point state beyond the trusted radius")
    a0 = model.zeta_gradient_at(x0, [u0, ux0])
    cs = char_set(a0, convention)

    step = 2.0 * np.pi / scan.directions.shape[0]
    covs = []
    dists = []
    for j in scan.singular_indices:
        om = scan.directions[j]
        cov = np.array([om[1], om[0]])
        covs.append(cov)
        dists.append(cs.distance(cov))
    covectors = np.asarray(covs).reshape(-1, 2)
    distances = np.asarray(dists)
    included = distances <= step + 1e-12
    return WfInclusionReport(scan, a0, covectors, distances, step, included)
