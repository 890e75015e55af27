import numpy as np
import pytest

from dcoset import presets
from dcoset.errors import MaxItersExceeded
from dcoset.gradmap import (FlowParams, charpoly_invariants, check_slice_identities, flow_to_closed,
                            fundamental_field, in_zero_fiber, induced_metric,
                            is_semisimple_operator, isotropy_and_slice, phi, phi_component, tau_x_matrix)
from dcoset.liegroup import GroupPoint, cartan_factor, random_point
from dcoset.numkernel import frob, matexp

MAIN = [presets.sl2c_sl2r_so2c, presets.sl4c_su22_kc, presets.sl4c_su22_so4c]


def unitary_point(u):
    return GroupPoint(u, u, np.zeros_like(u))


def x_t(t):
    u = matexp(t * 1j * np.diag([1.0, -1.0]))
    return unitary_point(u)


def test_phi_identity_is_zero():
    for make in MAIN:
        s = make()
        v = phi(s, unitary_point(np.eye(s.N, dtype=complex)))
        assert v.norm == 0.0


def test_phi_literal_formula_equal_involutions():
    s = presets.sl2c_conj_conj()
    rng = np.random.default_rng(0)
    xi = s.ps(2, 1).random_element(rng)
    v = phi(s, cartan_factor(s, matexp(xi)))
    assert frob(v.beta1 - (xi + s.sigma1(xi))) < 1e-12
    assert frob(v.beta2 + 2 * xi) < 1e-12


@pytest.mark.parametrize("make", MAIN)
def test_phi_values_in_right_spaces(make):
    s = make()
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = phi(s, random_point(s, rng))
        assert v.residual < 1e-9
        assert frob(s.sigma1(v.beta1) - v.beta1) < 1e-9
        assert frob(v.beta2.conj().T - v.beta2) < 1e-9


@pytest.mark.parametrize("make", MAIN)
def test_equivariance(make):
    s = make()
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = random_point(s, rng)
        k1 = matexp(s.ks(1, 1).random_element(rng, 2.0))
        k2 = matexp(s.ks(2, 1).random_element(rng, 2.0))
        v = phi(s, x)
        w = phi(s, cartan_factor(s, k1 @ x.value @ k2.conj().T))
        assert frob(w.beta1 - k1 @ v.beta1 @ k1.conj().T) < 1e-9
        assert frob(w.beta2 - k2 @ v.beta2 @ k2.conj().T) < 1e-9


@pytest.mark.parametrize("make", MAIN)
def test_gradient_identity(make):
    s = make()
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = random_point(s, rng).value
        xi1, xi2 = s.ps(1, 1).random_element(rng), s.ps(2, 1).random_element(rng)
        z1, z2 = s.gs(1, 1).random_element(rng), s.gs(2, 1).random_element(rng)
        h = 1e-5
        F = lambda t: phi_component(s, matexp(t * z1) @ x @ matexp(-t * z2), xi1, xi2)
        lhs = (F(h) - F(-h)) / (2 * h)
        rhs = induced_metric(x, fundamental_field(x, xi1, xi2), fundamental_field(x, z1, z2))
        assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))


def test_zero_fiber_examples():
    s = presets.sl2c_sl2r_so2c()
    for t in np.linspace(0, np.pi, 9):
        assert in_zero_fiber(s, x_t(t))
    rng = np.random.default_rng(4)
    xi = s.p.random_element(rng)
    assert frob(xi + s.sigma2(xi)) > 1e-3
    assert not in_zero_fiber(s, cartan_factor(s, matexp(xi)))


@pytest.mark.parametrize("make", MAIN)
def test_zero_fiber_double_characterization(make):
    s = make()
    rng = np.random.default_rng(5)
    for _ in range(50):
        in_zero_fiber(s, random_point(s, rng))  # raises on disagreement
    # flowed points lie in the zero fiber, where both tests must agree as well
    x0, _ = flow_to_closed(s, random_point(s, rng))
    assert in_zero_fiber(s, x0)


def test_flow_already_converged():
    s = presets.sl2c_sl2r_so2c()
    x = x_t(0.3)
    x0, tr = flow_to_closed(s, x)
    assert x0 is x and len(tr.steps) == 1 and tr.converged


@pytest.mark.parametrize("make", MAIN)
def test_flow_converges_and_preserves_invariants(make):
    s = make()
    rng = np.random.default_rng(6)
    x = random_point(s, rng)
    x0, tr = flow_to_closed(s, x)
    assert tr.converged and phi(s, x0).norm < 1e-8
    norms = tr.norms
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    assert tr.invariant_drift < 1e-7
    assert len(tr.steps) < 10_000


def test_flow_towards_nonclosed_limit():
    s = presets.sl2c_sl2r_so2c()
    x = x_t(np.pi / 4)
    sd = isotropy_and_slice(s, x)
    Z = sd.hx.basis[0]
    M = sd.qx.operator_matrix(lambda Y: Z @ Y - Y @ Z)
    w, V = np.linalg.eig(M)
    zeta = sd.qx.from_coords(np.real(V[:, np.argmax(w.real)]))
    y = cartan_factor(s, x.value @ matexp(0.5 * zeta))
    with pytest.raises(MaxItersExceeded) as info:
        flow_to_closed(s, y, FlowParams(max_iters=3000))
    tr = info.value.trace
    norms = tr.norms
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-2 * norms[0]
    # the flowed point approaches the compact orbit K1 x K2 of x_{pi/4}, on
    # which the log part vanishes
    end = info.value.point
    assert frob(end.xi) < 0.05 * frob(y.xi) + 0.05


def test_isotropy_identity_equal_involutions():
    s = presets.sl2c_conj_conj()
    sd = isotropy_and_slice(s, unitary_point(np.eye(2, dtype=complex)))
    assert sd.hx.dim == s.gs(1, 1).dim and sd.qx.dim == s.gs(1, -1).dim
    assert np.allclose(sd.taux, np.eye(6), atol=1e-12)


def test_isotropy_su22_kc_at_u1():
    s = presets.sl4c_su22_kc()
    X = np.zeros((4, 4), complex)
    X[0, 3] = X[3, 0] = 1j * np.pi / 4
    sd = isotropy_and_slice(s, unitary_point(matexp(X)))
    # slice tangent dimension 4, isotropy of real dimension 3
    assert sd.qx.dim == 4 and sd.hx.dim == 3
    chk = check_slice_identities(s, sd)
    assert chk.tau_semisimple and chk.fixed_matches and chk.dimension_identity


def test_isotropy_sl2_strongly_regular():
    s = presets.sl2c_sl2r_so2c()
    sd = isotropy_and_slice(s, x_t(np.pi / 8))
    assert sd.qx.dim == 1 and sd.hx.dim == 0


def test_tau_x_conjugation_invariance():
    s = presets.sl4c_su22_so4c()
    rng = np.random.default_rng(7)
    x = random_point(s, rng)
    g1 = matexp(0.5 * s.gs(1, 1).random_element(rng))
    g2 = matexp(0.5 * s.gs(2, 1).random_element(rng))
    y = cartan_factor(s, g1 @ x.value @ np.linalg.inv(g2))
    Tx, Ty = tau_x_matrix(s, x), tau_x_matrix(s, y)
    r = 2 * np.linalg.norm(Tx, 2) + 1
    a, b = charpoly_invariants(Tx, r), charpoly_invariants(Ty, r)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-9


def test_semisimple_operator_nonnormal_close_eigenvalues():
    rng = np.random.default_rng(9)
    P = np.eye(6) + 3 * rng.standard_normal((6, 6))
    D = np.diag([11.0, 11.0, 0.089201, 0.089159, -1.0, -1.0])
    assert is_semisimple_operator(P @ D @ np.linalg.inv(P))


def test_semisimple_operator_detects_jordan_block():
    rng = np.random.default_rng(10)
    P = np.eye(4) + rng.standard_normal((4, 4))
    J = np.diag([2.0, 2.0, -1.0, 0.5]) + np.diag([1.0, 0, 0], 1)
    assert not is_semisimple_operator(P @ J @ np.linalg.inv(P))
