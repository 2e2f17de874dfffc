"""Model linearization, characteristic geometry, and the lifted identity."""

import numpy as np
import pytest

from carleman.errors import (ArityMismatch, CharacteristicDirection,
                             SingularJacobian, TrustBoxExceeded)
from carleman.jets import Jet, jet_eval, jet_mul, jet_scale, jet_variable
from carleman.pde import (RhsModel, SolutionSamples, chain_identity_check,
                          char_set, hamiltonian_apply, hamiltonian_lift,
                          linearize, renormalize, theta_reduce,
                          wf_inclusion_experiment)
from carleman.weights import make_sequence

ROOT2 = np.sqrt(2.0)


def _x(degree=8):
    return jet_variable(0, 1, 2, degree)


def _z0(degree=8):
    return jet_variable(1, 1, 2, degree)


def _z1(degree=8):
    return jet_variable(2, 1, 2, degree)


def transport_model():
    # du/dt = du/dx, solutions g(x + t)
    return RhsModel(_z1(), fn=lambda x, z0, z1: z1)


def neg_transport_model():
    # du/dt = -du/dx, solutions g(x - t)
    return RhsModel(jet_scale(_z1(), -1.0), fn=lambda x, z0, z1: -z1)


def dilation_model():
    # du/dt = -x du/dx, the dilation flow
    return RhsModel(jet_mul(jet_scale(_x(), -1.0), _z1()),
                    fn=lambda x, z0, z1: -x * z1)


# ---------------------------------------------------------------------------
# model and samples

def test_model_needs_gradient_slots():
    bad = jet_variable(1, 1, 1, 8)          # only zeta_0, no gradient slot
    with pytest.raises(ArityMismatch):
        RhsModel(bad)


def test_model_eval_jet_fallback():
    m = RhsModel(jet_scale(_z1(), -1.0))
    assert m.eval(0.3, [0.1, 0.25]) == pytest.approx(-0.25)
    a0 = m.zeta_gradient_at(0.3, [0.1, 0.25])
    assert a0.shape == (1,)
    assert a0[0] == pytest.approx(-1.0)


def test_samples_matched_steps_cancel():
    # equal dx and dt make the two difference quotients read the same table
    # entries for any profile g(x + t), so the residual is pure rounding
    s = SolutionSamples.from_function(lambda x, t: np.sin(x + t),
                                     -0.5, 0.5, 81, -0.2, 0.2, 33)
    assert s.dx == pytest.approx(s.dt)
    assert s.residual(transport_model()) < 1e-12


def test_samples_oscillatory_residual_scale():
    # d/dt e^{x+it} = i u; central differences miss by (1 - sinc h) ~ h^2/6
    model = RhsModel(jet_scale(_z0(), 1j), fn=lambda x, z0, z1: 1j * z0)
    s = SolutionSamples.from_function(lambda x, t: np.exp(x + 1j * t),
                                     -0.5, 0.5, 1001, -0.1, 0.1, 201)
    res = s.certify(model, tol=1e-6)
    assert 1e-8 < res < 1e-6


def test_certify_rejects_coarse_grid():
    model = RhsModel(jet_scale(_z0(), 1j), fn=lambda x, z0, z1: 1j * z0)
    s = SolutionSamples.from_function(lambda x, t: np.exp(x + 1j * t),
                                     -0.5, 0.5, 21, -0.1, 0.1, 9)
    with pytest.raises(ValueError):
        s.certify(model, tol=1e-6)


def test_trust_radius_guard():
    model = RhsModel(_z1(), trust_radius=0.5)
    s = SolutionSamples.from_function(lambda x, t: np.sin(x + t),
                                     -0.5, 0.5, 81, -0.2, 0.2, 33)
    with pytest.raises(TrustBoxExceeded):
        s.residual(model)
    with pytest.raises(TrustBoxExceeded):
        linearize(model, s)


def test_linearize_dilation_coefficient():
    s = SolutionSamples.from_function(lambda x, t: x * np.exp(-t),
                                     -0.5, 0.5, 101, -0.2, 0.2, 41)
    a, = linearize(dilation_model(), s)
    xi, ui, ux, _ = s.interior()
    assert a.shape == ui.shape
    assert np.max(np.abs(a - (-xi[:, None]))) < 1e-12


def test_linearize_state_dependent_coefficient():
    # f = zeta_0 zeta_1 linearizes to a = u on the sample grid
    model = RhsModel(jet_mul(_z0(), _z1()))
    s = SolutionSamples.from_function(lambda x, t: np.sin(x + t),
                                     -0.5, 0.5, 81, -0.2, 0.2, 33)
    a, = linearize(model, s)
    _, ui, _, _ = s.interior()
    assert np.max(np.abs(a - ui)) < 1e-12


# ---------------------------------------------------------------------------
# characteristic set

def test_char_membership_real_symbol():
    cs = char_set(-1.0)
    assert cs.basis.shape == (2, 1)
    assert cs.contains([1.0 / ROOT2, -1.0 / ROOT2], tol=1e-12)
    assert cs.distance([1.0 / ROOT2, 1.0 / ROOT2]) == pytest.approx(1.0)


def test_char_imaginary_symbol_is_trivial():
    cs = char_set(1j)
    assert cs.basis.shape[1] == 0
    assert cs.distance([1.0 / ROOT2, 1.0 / ROOT2]) == pytest.approx(1.0)


def test_char_paper_convention_flips_sign():
    cs = char_set(-1.0, convention="paper")
    assert cs.contains([1.0 / ROOT2, 1.0 / ROOT2], tol=1e-12)
    assert cs.distance([1.0 / ROOT2, -1.0 / ROOT2]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        char_set(-1.0, convention="sideways")


def test_char_two_space_dims():
    cs = char_set([-1.0, 0.0])
    assert cs.basis.shape == (3, 2)
    assert cs.contains([1.0 / ROOT2, -1.0 / ROOT2, 0.0], tol=1e-12)
    assert cs.distance([1.0 / ROOT2, 1.0 / ROOT2, 0.0]) == pytest.approx(1.0)


def test_theta_reduce_angles():
    th, g = theta_reduce(1.0, 0.0, 1.0)
    assert th == pytest.approx(1.5 * np.pi)
    assert g == pytest.approx(-1.0)
    th, g = theta_reduce(1j, 0.0, 1.0)
    assert th == pytest.approx(np.pi)
    assert g == pytest.approx(-1.0)
    th, g = theta_reduce(0.5j, 1.0, 0.0)       # pure tau forcing
    assert th == pytest.approx(1.5 * np.pi)
    assert g == pytest.approx(-1.0)


def test_theta_reduce_characteristic_raises():
    # tau = xi kills both parts of g when a0 = -1
    with pytest.raises(CharacteristicDirection):
        theta_reduce(-1.0, 1.0 / ROOT2, 1.0 / ROOT2)
    with pytest.raises(ArityMismatch):
        theta_reduce([1.0, 2.0], 0.0, 1.0)


# ---------------------------------------------------------------------------
# Hamiltonian lift

def test_lift_transport_is_flat():
    H = hamiltonian_lift(transport_model())
    assert H.a[0].coeffs == {(0, 0, 0): pytest.approx(-1.0)}
    assert H.b[0].coeffs == {}
    assert H.b[1].coeffs == {}


def test_lift_product_model():
    H = hamiltonian_lift(RhsModel(jet_mul(_z0(), _z1())))
    assert H.a[0].coeffs == {(0, 1, 0): pytest.approx(-1.0)}
    assert H.b[0].coeffs == {}
    assert H.b[1].coeffs == {(0, 0, 2): pytest.approx(1.0)}


def test_lift_x_coefficient_model():
    H = hamiltonian_lift(RhsModel(jet_mul(_x(), _z1())))
    assert H.a[0].coeffs == {(1, 0, 0): pytest.approx(-1.0)}
    assert H.b[0].coeffs == {}
    assert H.b[1].coeffs == {(0, 0, 1): pytest.approx(1.0)}


def test_lift_observables_transport():
    H = hamiltonian_lift(transport_model())
    vals = []
    for phi in (_z0(), _z1(), _x()):
        out = hamiltonian_apply(H, phi)
        vals.append(complex(jet_eval(out, x=0.3, zeta=[0.2, 0.4])))
    assert vals[0] == pytest.approx(0.0)
    assert vals[1] == pytest.approx(0.0)
    assert vals[2] == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# chain identity

def test_chain_identity_transport_exact():
    model = transport_model()
    for phi in (_z0(), _z1(), _x()):
        rep = chain_identity_check(model, lambda x, t: np.sin(x + t), phi,
                                   ux_fn=lambda x, t: np.cos(x + t))
        assert max(rep.errors) < 1e-10


def test_chain_identity_second_order():
    # f = -zeta_0, u = e^{-t} sin x: the time difference quotient carries
    # the only error, sinh(h)/h - 1, and the step halving divides it by 4
    model = RhsModel(jet_scale(_z0(), -1.0), fn=lambda x, z0, z1: -z0)
    rep = chain_identity_check(model, lambda x, t: np.exp(-t) * np.sin(x),
                               _z0(), ux_fn=lambda x, t: np.exp(-t) * np.cos(x))
    # the interior edge moves with the step, so the max shifts a little
    # off the clean factor of 4
    assert 1e-7 < rep.errors[1] < rep.errors[0] < 1e-3
    assert 3.5 < rep.ratios[0] < 4.5


def test_chain_identity_anisotropic_steps_expose_truncation():
    # with the x step at half the t step, the wave-profile cancellation is
    # broken and the transport fixture shows its own h^2/8 truncation error
    model = transport_model()
    rep = chain_identity_check(model, lambda x, t: np.sin(x + t), _z0(),
                               ux_fn=lambda x, t: np.cos(x + t),
                               anisotropy=0.5)
    assert 1e-6 < rep.errors[1] < rep.errors[0] < 1e-4
    assert 3.5 < rep.ratios[0] < 4.5


def test_chain_identity_multidim_rejected():
    f2 = jet_variable(3, 2, 3, 8)
    with pytest.raises(ArityMismatch):
        chain_identity_check(RhsModel(f2), lambda x, t: x, _z0())


# ---------------------------------------------------------------------------
# renormalization from a trace

def test_renormalize_recovers_dilation_field():
    x = np.linspace(-0.3, 0.3, 601)
    t = np.linspace(-0.05, 0.05, 101)
    z = x[:, None] * np.exp(-t[None, :])
    b = renormalize(z, x[1] - x[0], t[1] - t[0])
    assert np.max(np.abs(b - x[1:-1, None])) < 1e-7


def test_renormalize_matches_linearization():
    s = SolutionSamples.from_function(lambda x, t: x * np.exp(-t),
                                     -0.3, 0.3, 601, -0.05, 0.05, 101)
    b = renormalize(s.u, s.dx, s.dt)
    a, = linearize(dilation_model(), s)
    assert np.max(np.abs(b - (-a))) < 1e-7


def test_renormalize_singular_trace():
    t = np.linspace(-0.1, 0.1, 21)
    z = np.broadcast_to(t[None, :], (21, 21)).copy()   # no x dependence
    with pytest.raises(SingularJacobian):
        renormalize(z, 0.01, 0.01)
    x = np.linspace(-0.5, 0.5, 41)
    z = np.exp(20.0 * x)[:, None] + 0.0 * t[None, :]
    with pytest.raises(SingularJacobian):
        renormalize(z, x[1] - x[0], 0.01)
    with pytest.raises(ValueError):
        renormalize(np.ones(8), 0.1, 0.1)


# ---------------------------------------------------------------------------
# inclusion experiment

def test_wf_inclusion_conormal():
    model = neg_transport_model()
    s = SolutionSamples.from_function(
        lambda x, t: np.abs(x - t) ** 3, -1.0, 1.0, 41, -1.0, 1.0, 41)
    assert s.certify(model, tol=1e-10) < 1e-10
    seq = make_sequence("gevrey", s=2.0, K_max=64)
    rep = wf_inclusion_experiment(model, s, seq)
    assert list(rep.scan.singular_indices) == [24, 56]
    assert rep.a0[0] == pytest.approx(-1.0)
    assert rep.covectors.shape == (2, 2)
    assert np.max(rep.distances) < 1e-9
    assert rep.included.all()


def test_wf_inclusion_clean_solution():
    model = RhsModel(jet_scale(_z0(), 1j), fn=lambda x, z0, z1: 1j * z0)
    s = SolutionSamples.from_function(
        lambda x, t: np.exp(x + 1j * t), -1.0, 1.0, 41, -1.0, 1.0, 41)
    seq = make_sequence("gevrey", s=2.0, K_max=64)
    rep = wf_inclusion_experiment(model, s, seq)
    assert list(rep.scan.singular_indices) == []
    assert rep.covectors.shape == (0, 2)
    assert rep.included.shape == (0,)


def test_wf_inclusion_multidim_rejected():
    f2 = jet_variable(3, 2, 3, 8)
    s = SolutionSamples.from_function(lambda x, t: x + t,
                                     -1.0, 1.0, 11, -1.0, 1.0, 11)
    with pytest.raises(ArityMismatch):
        wf_inclusion_experiment(RhsModel(f2), s,
                                make_sequence("gevrey", s=2.0, K_max=64))
