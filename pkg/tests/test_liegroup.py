import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcoset import presets
from dcoset.errors import NotInGroup, NotInvariant, ScenarioError
from dcoset.liegroup import (InvolutionSpec, ReductiveGroupData, Scenario, cartan_factor,
                             eigenspace_split, random_unitary_part, scenario_from_json,
                             scenario_to_json, sl_real, theta, validate_scenario)
from dcoset.numkernel import RealSubspace, bracket, frob, matexp

ALL = [presets.sl2c_sl2r_so2c, presets.sl4c_su22_kc, presets.sl4c_su22_so4c,
       presets.sl2c_conj_conj, presets.sl2r_theta_theta, presets.su2_theta_theta,
       presets.su22_conj]


@pytest.mark.parametrize("make", ALL)
def test_presets_validate(make):
    s = make()
    rep = validate_scenario(s)
    assert rep.ok, rep.failures
    for j in (1, 2):
        assert s.gs(j, 1).dim + s.gs(j, -1).dim == s.g.dim
        for X in s.g.basis:
            assert frob(theta(s.sigma(j)(X)) - s.sigma(j)(theta(X))) < 1e-10
    assert s.k.dim + s.p.dim == s.g.dim
    basis = s.g.basis
    for X in basis:
        for Y in basis:
            assert s.g.residual(bracket(X, Y)) < 1e-9


def test_preset_dimensions():
    s = presets.sl2c_sl2r_so2c()
    assert (s.g.dim, s.gs(1, 1).dim, s.gs(2, 1).dim) == (6, 3, 2)
    s = presets.sl4c_su22_so4c()
    assert (s.g.dim, s.gs(1, 1).dim, s.gs(2, 1).dim) == (30, 15, 12)
    s = presets.sl4c_su22_kc()
    assert (s.g.dim, s.gs(1, 1).dim, s.gs(2, 1).dim) == (30, 15, 14)


def test_su22_conjugation_fixed_algebra_is_so22():
    s = presets.su22_conj()
    plus, minus = eigenspace_split(s, "sigma1", s.g)
    assert plus.dim == 6 and minus.dim == 9
    # so(2,2): real matrices X with X^T I22 + I22 X = 0
    for X in plus.basis:
        assert np.allclose(X.imag, 0, atol=1e-12)


def test_non_preserving_involution_fails():
    G = ReductiveGroupData(2, sl_real(2), "SL(2,R)")
    bad = InvolutionSpec(np.diag([1.0, 1j]), antiholomorphic=False)
    rep = validate_scenario(Scenario(G, bad, bad))
    assert not rep.ok
    assert "sigma1_preserves_algebra" in rep.failures


def test_eigenspace_split_theta_sl2r():
    s = presets.sl2r_theta_theta()
    plus, minus = eigenspace_split(s, "theta", s.g)
    assert (plus.dim, minus.dim) == (1, 2)
    X = plus.basis[0]
    assert np.allclose(X, -X.T) and np.allclose(X.imag, 0)


def test_eigenspace_split_composes():
    s = presets.sl4c_su22_kc()
    fixed2, _ = eigenspace_split(s, "sigma2", s.g)
    a, b = eigenspace_split(s, "theta", fixed2)
    assert a.dim + b.dim == fixed2.dim == 14
    E12 = np.zeros((4, 4), complex)
    E12[0, 1] = 1.0
    with pytest.raises(NotInvariant):
        eigenspace_split(s, "theta", RealSubspace.span([E12], 4))


def test_tau_fixed_split():
    s = presets.sl4c_su22_so4c()
    fixed, moved = eigenspace_split(s, "tau_fixed", s.g)
    assert fixed.dim + moved.dim == s.g.dim
    for X in fixed.basis:
        assert frob(s.tau(X) - X) < 1e-9


def test_cartan_factor_trivial():
    s = presets.sl2c_sl2r_so2c()
    u = matexp(s.k.random_element(np.random.default_rng(0)))
    gp = cartan_factor(s, u)
    assert frob(gp.xi) < 1e-12 and frob(gp.k - u) < 1e-12
    gp = cartan_factor(s, np.diag([2.0, 0.5]))
    assert np.allclose(gp.k, np.eye(2), atol=1e-14)
    assert np.allclose(gp.xi, np.diag([np.log(2), -np.log(2)]), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_cartan_factor_roundtrip(seed, scale):
    s = presets.sl4c_su22_kc()
    rng = np.random.default_rng(seed)
    k0 = random_unitary_part(s, rng)
    xi0 = s.p.random_element(rng)
    xi0 *= scale / max(frob(xi0), 1e-300)
    gp = cartan_factor(s, k0 @ matexp(xi0))
    assert frob(gp.k - k0) < 1e-9 and frob(gp.xi - xi0) < 1e-9
    assert frob(gp.k.conj().T @ gp.k - np.eye(4)) < 1e-10


def test_cartan_factor_rejects_outside_group():
    s = presets.sl2r_theta_theta()
    with pytest.raises(NotInGroup):
        cartan_factor(s, np.diag([2.0, 1.0]))  # determinant 2: log part has a trace


def test_group_involution_consistent_with_algebra():
    rng = np.random.default_rng(5)
    for make in (presets.sl2c_sl2r_so2c, presets.sl4c_su22_kc, presets.sl4c_su22_so4c):
        s = make()
        X = 0.3 * s.g.random_element(rng)
        for j in (1, 2):
            sig = s.sigma(j)
            assert frob(sig.on_group(matexp(X)) - matexp(sig(X))) < 1e-12


def test_json_roundtrip_and_errors():
    s = presets.sl2c_sl2r_so2c()
    obj = json.loads(json.dumps(scenario_to_json(s)))
    s2 = scenario_from_json(obj)
    assert s2.g.dim == 6 and validate_scenario(s2).ok
    assert scenario_from_json({"preset": "sl4c_su22_kc"}).g.dim == 30
    with pytest.raises(ScenarioError):
        scenario_from_json({"N": 2})
    with pytest.raises(ScenarioError):
        scenario_from_json({"preset": "nope"})
