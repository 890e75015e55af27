import numpy as np
import pytest

from dcoset import presets
from dcoset.errors import AlreadyClosed, IllConditioned
from dcoset.gradmap import isotropy_and_slice
from dcoset.liegroup import GroupPoint, InvolutionSpec, sl_complex, sl_real, su_pq
from dcoset.numkernel import RealSubspace, bracket, centralizer, frob, matexp
from dcoset.symmpair import (cartan_subspace, in_null_cone, is_closed_by_flow, is_closed_orbit,
                             jordan_chevalley, nonclosed_witness, pair_residual, phi_H,
                             random_conjugate, random_nilpotent, restricted_weights,
                             slice_at_semisimple, slice_pair, symmetric_pair)

CONJ4 = InvolutionSpec(np.eye(4, dtype=complex), antiholomorphic=True)
THETA2 = InvolutionSpec(np.eye(2, dtype=complex), antiholomorphic=True, outer=True)
ADJ2 = InvolutionSpec(np.diag([1.0, -1.0]).astype(complex))


def E(N, i, j):
    M = np.zeros((N, N), complex)
    M[i, j] = 1.0
    return M


def unitary_point(u):
    return GroupPoint(u, u, np.zeros_like(u))


def slice_at(make, u):
    s = make()
    return s, slice_pair(s, isotropy_and_slice(s, unitary_point(u)))


U1 = matexp(1j * np.pi / 4 * (E(4, 0, 3) + E(4, 3, 0)))
U2 = matexp(1j * np.pi / 4 * (E(4, 0, 3) + E(4, 3, 0) + E(4, 1, 2) + E(4, 2, 1)))
XPI4 = matexp(1j * np.pi / 4 * np.diag([1.0, -1.0]))

SLICES = [
    (presets.sl2c_sl2r_so2c, XPI4),
    (presets.sl4c_su22_kc, U1),
    (presets.sl4c_su22_kc, U2),
    (presets.sl4c_su22_so4c, np.eye(4, dtype=complex)),
]


def test_pair_relations():
    for make, u in SLICES:
        _, pr = slice_at(make, u)
        assert pair_residual(pr) < 1e-9
        assert pr.h.dim + pr.q.dim == pr.g.dim


def test_jordan_trivial_cases():
    pr = symmetric_pair(sl_real(2), THETA2)
    H = np.diag([1.0, -1.0]).astype(complex)
    xs, xn = jordan_chevalley(pr, H)
    assert frob(xs - H) < 1e-12 and frob(xn) < 1e-12
    pr = symmetric_pair(sl_real(2), ADJ2)
    xs, xn = jordan_chevalley(pr, E(2, 0, 1))
    assert frob(xs) < 1e-12 and frob(xn - E(2, 0, 1)) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_jordan_synthesis(seed):
    # q of (sl(4,C), conj) is i·sl(4,R); i·P J P^-1 with real P lies in q
    pr = symmetric_pair(sl_complex(4), CONJ4)
    rng = np.random.default_rng(seed)
    lam = rng.uniform(-2, 2)
    mu = rng.uniform(-2, 2)
    while abs(lam - mu) < 0.5 or abs(lam + mu) < 0.5 or abs(2 * lam + 2 * mu) < 0.5:
        mu = rng.uniform(-2, 2)
    D = np.diag([lam, lam, mu, -(2 * lam + mu)])
    Nil = E(4, 0, 1).real * rng.uniform(0.5, 2)
    P = rng.standard_normal((4, 4))
    Pi = np.linalg.inv(P)
    S0, N0 = 1j * P @ D @ Pi, 1j * P @ Nil @ Pi
    xs, xn = jordan_chevalley(pr, S0 + N0)
    assert frob(xs - S0) < 1e-8 * frob(S0) and frob(xn - N0) < 1e-8 * frob(S0)
    assert frob(bracket(xs, xn)) < 1e-9 * frob(S0) ** 2
    for X in (xs, xn):
        assert frob(pr.sigma(X) + X) < 1e-9 * frob(S0)
    w = nonclosed_witness(pr, S0 + N0)
    assert frob(w.eta0 - S0) < 1e-8 * frob(S0) and w.nil_certified


def test_closedness_basic():
    pr = symmetric_pair(sl_real(2), ADJ2)
    assert is_closed_orbit(pr, np.zeros((2, 2), complex))
    e = E(2, 0, 1)
    assert not is_closed_orbit(pr, e) and not is_closed_by_flow(pr, e)
    assert in_null_cone(pr, e)
    X = E(2, 0, 1) + 2 * E(2, 1, 0)
    assert is_closed_orbit(pr, X) and is_closed_by_flow(pr, X)
    assert not in_null_cone(pr, X)
    with pytest.raises(AlreadyClosed):
        nonclosed_witness(pr, X)
    w = nonclosed_witness(pr, e)
    assert frob(w.eta0) < 1e-12 and frob(w.nilpart - e) < 1e-12 and w.nil_certified


def test_cartan_elements_closed_and_in_phi_zero():
    for make, u in SLICES:
        _, pr = slice_at(make, u)
        cd = cartan_subspace(pr, seed=3)
        rng = np.random.default_rng(0)
        for _ in range(5):
            eta = cd.c.random_element(rng)
            assert frob(phi_H(pr, eta)) < 1e-9
            assert is_closed_orbit(pr, eta)


def test_phi_H_vanishes_on_k_and_p():
    pr = symmetric_pair(sl_complex(4), CONJ4)
    rng = np.random.default_rng(1)
    assert frob(phi_H(pr, pr.qk.random_element(rng))) < 1e-12
    assert frob(phi_H(pr, pr.qp.random_element(rng))) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_phi_H_gradient_identity(seed):
    pr = symmetric_pair(su_pq(2, 2), CONJ4)
    rng = np.random.default_rng(seed)
    xi = pr.q.random_element(rng)
    eta = pr.hp.random_element(rng)
    zeta = pr.h.random_element(rng)
    h = 1e-5
    f = lambda t: np.real(np.vdot(eta, phi_H(pr, matexp(t * zeta) @ xi @ matexp(-t * zeta))))
    lhs = (f(h) - f(-h)) / (2 * h)
    rhs = np.real(np.vdot(bracket(zeta, xi), bracket(eta, xi)))
    assert abs(lhs - rhs) < 1e-6 * max(1.0, abs(rhs))


def brute_force_rank(pr, rng, samples=30):
    """Smallest centralizer dimension in q over random elements."""
    return min(centralizer([pr.q.random_element(rng)], pr.q).dim for _ in range(samples))


def test_cartan_subspace_dims():
    rng = np.random.default_rng(0)
    pr = symmetric_pair(sl_complex(2), InvolutionSpec(np.eye(2, dtype=complex), True))
    for seed in range(4):
        cd = cartan_subspace(pr, seed)
        assert cd.dim == brute_force_rank(pr, rng) == 1
    pr = symmetric_pair(su_pq(2, 2), CONJ4)
    cd = cartan_subspace(pr, 0)
    assert cd.dim == 3 == brute_force_rank(pr, rng)
    # abelian theta-stable q: the Cartan subspace is q itself
    diag = RealSubspace.span([np.diag([1.0, -1.0]).astype(complex), 1j * np.diag([1.0, -1.0])], 2)
    pr = symmetric_pair(diag, InvolutionSpec(np.eye(2, dtype=complex), True))
    assert cartan_subspace(pr, 0).dim == pr.q.dim == 1


def test_cartan_subspace_invariants():
    for make, u in SLICES:
        _, pr = slice_at(make, u)
        cd = cartan_subspace(pr, 7)
        basis = cd.c.basis
        for A in basis:
            for B in basis:
                assert frob(bracket(A, B)) < 1e-9
            assert cd.c.contains(-A.conj().T, 1e-8)
        assert centralizer(basis, pr.q).dim == cd.dim


def test_weights_sl2():
    pr = symmetric_pair(sl_real(2), THETA2)
    H = np.diag([1.0, -1.0]).astype(complex)
    cd = cartan_subspace(pr, 0)
    cd_fixed = type(cd)(RealSubspace.span([H]), RealSubspace.zero(2), RealSubspace.span([H]))
    tab = restricted_weights(pr, cd_fixed)
    coord = np.array([np.real(np.vdot(cd_fixed.a.basis[0], H))])
    vals = sorted(round(w.value @ coord, 10) for w in tab.weights)
    assert vals == [-2.0, 0.0, 2.0]


def test_weight_table_properties():
    for make, u in SLICES:
        _, pr = slice_at(make, u)
        cd = cartan_subspace(pr, 2)
        tab = restricted_weights(pr, cd)
        assert sum(w.mult for w in tab.weights) == pr.g.dim
        for w in tab.weights:
            neg = [v for v in tab.weights if np.allclose(v.value, -w.value, atol=1e-7)]
            assert len(neg) == 1 and neg[0].mult == w.mult
        zero = tab.zero()
        assert zero is not None and zero.mult >= cd.dim


def test_slice_at_semisimple_dims():
    rng = np.random.default_rng(4)
    for make, u in SLICES:
        _, pr = slice_at(make, u)
        cd = cartan_subspace(pr, 1)
        tab = restricted_weights(pr, cd)
        d0 = slice_at_semisimple(pr, cd, tab, np.zeros((pr.N, pr.N), complex))
        assert d0.dims[0] == 0 and sum(d0.dims) == pr.q.dim
        for _ in range(20):
            eta = cd.c.random_element(rng)
            dd = slice_at_semisimple(pr, cd, tab, eta)
            assert sum(dd.dims) == pr.q.dim
            assert dd.weight_part.dim == 0  # random eta is regular


def test_slice_at_semisimple_on_a_wall():
    # su(2,2) with conjugation; eta on a wall of the weight hyperplanes
    pr = symmetric_pair(su_pq(2, 2), CONJ4)
    cd = cartan_subspace(pr, 0)
    tab = restricted_weights(pr, cd)
    rng = np.random.default_rng(5)
    root = tab.nonzero()[0].value
    k = tab.dim_t
    walls = [np.r_[root[:k], np.zeros(cd.dim - k)], np.r_[np.zeros(k), root[k:]]]
    walls = [w for w in walls if np.linalg.norm(w) > 1e-9]
    Q, _ = np.linalg.qr(np.array(walls).T)
    for _ in range(5):
        c = rng.standard_normal(cd.dim)
        c -= Q @ (Q.T @ c)
        eta = sum(ci * b for ci, b in zip(c, cd.ordered_basis))
        dd = slice_at_semisimple(pr, cd, tab, eta)
        assert sum(dd.dims) == pr.q.dim
        assert dd.weight_part.dim == centralizer([eta], pr.q).dim - cd.dim > 0


def test_null_cone_sl2_slice():
    s, pr = slice_at(presets.sl2c_sl2r_so2c, XPI4)
    Z = pr.h.basis[0]
    M = pr.q.operator_matrix(lambda Y: Z @ Y - Y @ Z)
    w, V = np.linalg.eig(M)
    V = np.real(V)
    axes = [pr.q.from_coords(V[:, i]) for i in range(2)]
    for a in axes:
        assert in_null_cone(pr, a) and not is_closed_orbit(pr, a)
    assert not in_null_cone(pr, axes[0] + axes[1])
    assert is_closed_orbit(pr, axes[0] + axes[1])


@pytest.mark.parametrize("idx", range(len(SLICES)))
def test_closedness_routes_agree(idx):
    make, u = SLICES[idx]
    _, pr = slice_at(make, u)
    rng = np.random.default_rng(10 + idx)
    checked = 0
    for i in range(30):
        if i % 2 == 0:
            xi = pr.q.random_element(rng)
        else:
            xi = random_nilpotent(pr, rng)
            if xi is None:
                continue
            xi = random_conjugate(pr, xi, rng)
        try:
            a = is_closed_orbit(pr, xi)
        except IllConditioned:
            continue
        assert a == is_closed_by_flow(pr, xi)
        checked += 1
    assert checked >= 10


def test_null_cone_open_orbit_proxy():
    for make, u in SLICES[1:]:
        _, pr = slice_at(make, u)
        rng = np.random.default_rng(0)
        dims = []
        for _ in range(60):
            xi = random_nilpotent(pr, rng)
            if xi is None:
                break
            dims.append(RealSubspace.span([bracket(H, xi) for H in pr.h.basis], pr.N).dim)
        if dims:
            assert np.mean(np.array(dims) == max(dims)) > 0.5


from hypothesis import given, settings, strategies as st  # noqa: E402

SU22_PAIR = symmetric_pair(su_pq(2, 2), CONJ4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_property_jordan_parts(seed):
    rng = np.random.default_rng(seed)
    xi = SU22_PAIR.q.random_element(rng)
    try:
        xs, xn = jordan_chevalley(SU22_PAIR, xi)
    except IllConditioned:
        return
    assert frob(xs + xn - xi) < 1e-9 * (1 + frob(xi))
    assert frob(bracket(xs, xn)) < 1e-7 * (1 + frob(xi)) ** 2
    assert SU22_PAIR.q.residual(xs) < 1e-8 * (1 + frob(xi))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_property_phi_H_equivariant(seed):
    rng = np.random.default_rng(seed)
    xi = SU22_PAIR.q.random_element(rng)
    g = matexp(SU22_PAIR.hk.random_element(rng, 2.0))
    gi = g.conj().T
    lhs = phi_H(SU22_PAIR, g @ xi @ gi)
    rhs = g @ phi_H(SU22_PAIR, xi) @ gi
    assert frob(lhs - rhs) < 1e-9 * (1 + frob(xi)) ** 2
