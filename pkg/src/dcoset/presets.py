"""Built-in scenarios.

All three named presets use G = SL(N, C) with maximal compact SU(N):

sl2c_sl2r_so2c   sigma1 = entrywise conjugation (G1 = SL(2,R)),
                 sigma2 = X -> -X^T (G2 = SO(2,C)).
sl4c_su22_kc     sigma1 = X -> -I22 X^H I22 (G1 = SU(2,2)),
                 sigma2 = Ad(I22) (G2 = S(GL(2,C) x GL(2,C)), the complexified
                 maximal compact subgroup of SU(2,2)).
sl4c_su22_so4c   sigma1 as above, sigma2 = X -> -I22 X^T I22 (G2 = SO(4,C) in
                 the I22-twisted realization).
"""
from __future__ import annotations

import numpy as np

from .errors import ScenarioError
from .liegroup import (InvolutionSpec, ReductiveGroupData, Scenario, sl_complex, sl_real,
                       su, su_pq)

I22 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)

CONJ2 = InvolutionSpec(np.eye(2, dtype=complex), antiholomorphic=True)
NEG_T2 = InvolutionSpec(np.eye(2, dtype=complex), antiholomorphic=False, outer=True)
SU22 = InvolutionSpec(I22, antiholomorphic=True, outer=True)
AD_I22 = InvolutionSpec(I22, antiholomorphic=False, outer=False)
SO4C_TWISTED = InvolutionSpec(I22, antiholomorphic=False, outer=True)


def cartan_involution(N: int) -> InvolutionSpec:
    """theta(X) = -X^H written in involution form."""
    return InvolutionSpec(np.eye(N, dtype=complex), antiholomorphic=True, outer=True)


def entrywise_conjugation(N: int) -> InvolutionSpec:
    return InvolutionSpec(np.eye(N, dtype=complex), antiholomorphic=True)


def sl2c_sl2r_so2c() -> Scenario:
    G = ReductiveGroupData(2, sl_complex(2), "SL(2,C)")
    return Scenario(G, CONJ2, NEG_T2, "sl2c_sl2r_so2c")


def sl4c_su22_kc() -> Scenario:
    G = ReductiveGroupData(4, sl_complex(4), "SL(4,C)")
    return Scenario(G, SU22, AD_I22, "sl4c_su22_kc")


def sl4c_su22_so4c() -> Scenario:
    G = ReductiveGroupData(4, sl_complex(4), "SL(4,C)")
    return Scenario(G, SU22, SO4C_TWISTED, "sl4c_su22_so4c")


PRESETS = {
    "sl2c_sl2r_so2c": sl2c_sl2r_so2c,
    "sl4c_su22_kc": sl4c_su22_kc,
    "sl4c_su22_so4c": sl4c_su22_so4c,
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# auxiliary scenarios used by tests and examples

def same_involution(G: ReductiveGroupData, sigma: InvolutionSpec, name: str = "") -> Scenario:
    return Scenario(G, sigma, sigma, name or f"{G.name} sigma1=sigma2")


def sl2c_conj_conj() -> Scenario:
    """sigma1 = sigma2 = conjugation on SL(2,C): double cosets SL(2,R)\\SL(2,C)/SL(2,R)."""
    return same_involution(ReductiveGroupData(2, sl_complex(2), "SL(2,C)"), CONJ2, "sl2c_conj_conj")


def sl2r_theta_theta() -> Scenario:
    return same_involution(ReductiveGroupData(2, sl_real(2), "SL(2,R)"), cartan_involution(2),
                           "sl2r_theta_theta")


def su2_theta_theta() -> Scenario:
    """Compact group with sigma1 = sigma2 = theta (= identity on su(2))."""
    return same_involution(ReductiveGroupData(2, su(2), "SU(2)"), cartan_involution(2),
                           "su2_theta_theta")


def su22_conj() -> Scenario:
    """SU(2,2) with entrywise conjugation on both sides (H = SO(2,2))."""
    return same_involution(ReductiveGroupData(4, su_pq(2, 2), "SU(2,2)"), entrywise_conjugation(4),
                           "su22_conj")
