"""Matrix groups, their Cartan involution, two further involutions, and Cartan factors.

The ambient group G sits in GL(N, C) with Lie algebra g given by a real
orthonormal basis.  The Cartan involution is theta(X) = -X^H, so
k = g ∩ u(N) and p = g ∩ i·u(N).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import numkernel as nk
from .errors import InternalInconsistency, NotInGroup, NotInvariant, ScenarioError
from .numkernel import RealSubspace, bracket, dagger, frob, matexp


def theta(X: np.ndarray) -> np.ndarray:
    return -X.conj().T


def Ad(g: np.ndarray, X: np.ndarray, g_inv: np.ndarray | None = None) -> np.ndarray:
    if g_inv is None:
        g_inv = np.linalg.inv(g)
    return g @ X @ g_inv


# ---------------------------------------------------------------------------
# standard algebras

def _unit(N: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((N, N), dtype=complex)
    E[i, j] = 1.0
    return E


def _traceless_diagonals(N: int) -> list[np.ndarray]:
    return [_unit(N, i, i) - _unit(N, i + 1, i + 1) for i in range(N - 1)]


def sl_real(N: int) -> RealSubspace:
    mats = _traceless_diagonals(N) + [_unit(N, i, j) for i in range(N) for j in range(N) if i != j]
    return RealSubspace.span(mats, N)


def sl_complex(N: int) -> RealSubspace:
    mats = sl_real(N).basis
    return RealSubspace.span(mats + [1j * m for m in mats], N)


def gl_complex(N: int) -> RealSubspace:
    return RealSubspace(N, np.eye(2 * N * N))


def su(N: int) -> RealSubspace:
    mats = [1j * d for d in _traceless_diagonals(N)]
    for i in range(N):
        for j in range(i + 1, N):
            mats.append(_unit(N, i, j) - _unit(N, j, i))
            mats.append(1j * (_unit(N, i, j) + _unit(N, j, i)))
    return RealSubspace.span(mats, N)


def su_pq(p: int, q: int) -> RealSubspace:
    """su(p, q) = {X : X^H I_pq + I_pq X = 0, tr X = 0}, a theta-stable real form."""
    N = p + q
    Ipq = np.diag([1.0] * p + [-1.0] * q)
    mats = []
    for X in su(N).basis:
        # X ↦ X on the diagonal blocks, X ↦ i X on the off-diagonal blocks
        Y = X.copy()
        Y[:p, p:] *= 1j
        Y[p:, :p] *= 1j
        mats.append(Y)
    sub = RealSubspace.span(mats, N)
    for Y in sub.basis:
        assert frob(dagger(Y) @ Ipq + Ipq @ Y) < 1e-12
    return sub


# ---------------------------------------------------------------------------
# data types

@dataclass(frozen=True, eq=False)
class ReductiveGroupData:
    N: int
    algebra: RealSubspace
    name: str = "G"

    @cached_property
    def is_complex(self) -> bool:
        """True when the algebra is closed under multiplication by i."""
        return all(self.algebra.contains(1j * b) for b in self.algebra.basis)


@dataclass(frozen=True, eq=False)
class InvolutionSpec:
    """An involution given by a fixed conjugator A.

    Inner form:  sigma(X) = A eps(X) A^-1,      sigma(g) = A eps(g) A^-1.
    Outer form:  sigma(X) = -A eps(X)^T A^-1,   sigma(g) = A eps(g)^-T A^-1.
    eps is entrywise conjugation when ``antiholomorphic`` and the identity
    otherwise.  The outer form covers transpose-type involutions such as the
    one defining SU(p, q) or SO(N, C).
    """

    A: np.ndarray
    antiholomorphic: bool = False
    outer: bool = False

    @cached_property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        Y = X.conj() if self.antiholomorphic else X
        if self.outer:
            return -self.A @ Y.T @ self.A_inv
        return self.A @ Y @ self.A_inv

    def on_group(self, g: np.ndarray) -> np.ndarray:
        Y = g.conj() if self.antiholomorphic else g
        if self.outer:
            Y = np.linalg.inv(Y).T
        return self.A @ Y @ self.A_inv

    def to_json(self) -> dict:
        return {"A": matrix_to_json(self.A), "antiholomorphic": self.antiholomorphic,
                "outer": self.outer}


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """x = k·exp(xi) with k in the unitary part and xi in p."""

    value: np.ndarray
    k: np.ndarray
    xi: np.ndarray

    @classmethod
    def from_factors(cls, k: np.ndarray, xi: np.ndarray) -> "GroupPoint":
        return cls(k @ matexp(xi), np.asarray(k, dtype=complex), np.asarray(xi, dtype=complex))

    @property
    def inv(self) -> np.ndarray:
        # x^-1 = exp(-xi) k^H
        return matexp(-self.xi) @ dagger(self.k)


class Scenario:
    """A group G with involutions sigma1, sigma2 commuting with theta.

    Eigenspaces are cached on first use and never recomputed.
    """

    def __init__(self, group: ReductiveGroupData, sigma1: InvolutionSpec,
                 sigma2: InvolutionSpec, name: str | None = None):
        self.group = group
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.name = name or group.name
        self._cache: dict = {}

    @property
    def N(self) -> int:
        return self.group.N

    @property
    def g(self) -> RealSubspace:
        return self.group.algebra

    @property
    def is_complex(self) -> bool:
        return self.group.is_complex

    def sigma(self, j: int) -> InvolutionSpec:
        return {1: self.sigma1, 2: self.sigma2}[j]

    def tau(self, X: np.ndarray) -> np.ndarray:
        return self.sigma2(self.sigma1(X))

    def _split(self, key, f, domain):
        if key not in self._cache:
            self._cache[key] = involution_split(f, domain)
        return self._cache[key]

    @property
    def k(self) -> RealSubspace:
        return self._split("theta", theta, self.g)[0]

    @property
    def p(self) -> RealSubspace:
        return self._split("theta", theta, self.g)[1]

    def gs(self, j: int, sign: int) -> RealSubspace:
        """g^{sigma_j} (sign=+1) or g^{-sigma_j} (sign=-1)."""
        return self._split(("g", j), self.sigma(j), self.g)[0 if sign > 0 else 1]

    def ks(self, j: int, sign: int) -> RealSubspace:
        return self._split(("k", j), self.sigma(j), self.k)[0 if sign > 0 else 1]

    def ps(self, j: int, sign: int) -> RealSubspace:
        return self._split(("p", j), self.sigma(j), self.p)[0 if sign > 0 else 1]

    def cached(self, key, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def center(self) -> RealSubspace:
        return self.cached("center", lambda: nk.centralizer(self.g.basis, self.g))

    def __repr__(self) -> str:
        return f"Scenario({self.name!r}, N={self.N}, dim g={self.g.dim})"


def involution_split(f, domain: RealSubspace,
                     tol: float | None = None) -> tuple[RealSubspace, RealSubspace]:
    for b in domain.basis:
        if not domain.contains(f(b), tol):
            raise NotInvariant("domain is not preserved by the involution")
    M = domain.operator_matrix(f)
    ident = np.eye(domain.dim)
    # eigenvalues of the projectors are exactly 0 or 1, so a loose cut is safe
    plus = RealSubspace.from_columns(domain.vecs @ ((ident + M) / 2), domain.N, tol=1e-6)
    minus = RealSubspace.from_columns(domain.vecs @ ((ident - M) / 2), domain.N, tol=1e-6)
    if plus.dim + minus.dim != domain.dim:
        raise InternalInconsistency("eigenspace dimensions do not add up")
    return plus, minus


def eigenspace_split(s: Scenario, which: str, domain: RealSubspace) -> tuple[RealSubspace, RealSubspace]:
    """Split ``domain`` into +1 and -1 eigenspaces of an involution.

    For ``tau_fixed`` the pair is (fixed space of tau, image of tau - 1).
    """
    if which == "tau_fixed":
        for b in domain.basis:
            if not domain.contains(s.tau(b)):
                raise NotInvariant("domain is not preserved by tau")
        M = domain.operator_matrix(s.tau) - np.eye(domain.dim)
        _, sv, Vt = np.linalg.svd(M)
        r = int(np.sum(sv > nk.TOL.eps_rank))
        fixed = RealSubspace(domain.N, domain.vecs @ Vt[r:].T)
        moved = RealSubspace.from_columns(domain.vecs @ M, domain.N)
        if fixed.dim + moved.dim != domain.dim:
            raise InternalInconsistency("tau eigenspace dimensions do not add up")
        return fixed, moved
    f = {"sigma1": s.sigma1, "sigma2": s.sigma2, "theta": theta}[which]
    return involution_split(f, domain)


# ---------------------------------------------------------------------------
# validation

@dataclass
class Check:
    name: str
    passed: bool
    residual: float


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    tau_center_spectrum: list[complex] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name: str, residual: float, tol: float) -> None:
        self.checks.append(Check(name, bool(residual <= tol), float(residual)))


def validate_scenario(s: Scenario) -> ValidationReport:
    rep = ValidationReport()
    g = s.g
    eps = nk.TOL.eps_rank
    basis = g.basis
    rep.add("algebra_orthonormal", g.gram_error(), nk.TOL.eps_orth)
    closure = max((g.residual(bracket(X, Y)) for i, X in enumerate(basis) for Y in basis[i + 1:]),
                  default=0.0)
    rep.add("algebra_bracket_closed", closure, eps)
    rep.add("algebra_theta_stable", max((g.residual(theta(X)) for X in basis), default=0.0), eps)
    for j in (1, 2):
        sig = s.sigma(j)
        rep.add(f"sigma{j}_preserves_algebra", max(g.residual(sig(X)) for X in basis), eps)
        rep.add(f"sigma{j}_involutive", max(frob(sig(sig(X)) - X) for X in basis), eps)
        rep.add(f"sigma{j}_commutes_theta",
                max(frob(sig(theta(X)) - theta(sig(X))) for X in basis), 1e-10)
        hom = max(frob(sig(bracket(X, Y)) - bracket(sig(X), sig(Y)))
                  for i, X in enumerate(basis) for Y in basis[i:])
        rep.add(f"sigma{j}_bracket_compatible", hom, eps)
    if not rep.ok:
        return rep
    # integer dimension bookkeeping of the eigenspace splits
    rep.add("k_plus_p", abs(s.k.dim + s.p.dim - g.dim), 0)
    for j in (1, 2):
        rep.add(f"sigma{j}_split_dims", abs(s.gs(j, 1).dim + s.gs(j, -1).dim - g.dim), 0)
    z = s.center
    if z.dim:
        M = z.operator_matrix(s.tau)
        vals = np.linalg.eigvals(M)
        rep.tau_center_spectrum = sorted(complex(v) for v in vals)
        S, Nil = nk.jordan_decomposition(M)
        rep.add("tau_center_semisimple", float(np.linalg.norm(Nil)), 1e-8)
        rep.add("tau_center_unit_modulus", float(np.max(np.abs(np.abs(vals) - 1))), 1e-8)
    return rep


# ---------------------------------------------------------------------------
# Cartan factors

def cartan_factor(s: Scenario, x: np.ndarray) -> GroupPoint:
    """Factor x = k·exp(xi) with k unitary and xi in p."""
    x = np.asarray(x, dtype=complex)
    w, V = np.linalg.eigh(dagger(x) @ x)
    if w.min() <= nk.TOL.eps_pd:
        raise NotInGroup("x is singular")
    xi_raw = (V * (0.5 * np.log(w))) @ dagger(V)
    xi = s.p.project(xi_raw)
    if frob(xi - xi_raw) > nk.TOL.eps_member * max(1.0, frob(xi_raw)):
        raise NotInGroup(f"log part leaves p by {frob(xi - xi_raw):.3e}")
    k = x @ matexp(-xi)
    return GroupPoint(x, k, xi)


def random_unitary_part(s: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Random element of K = G ∩ U(N).

    Haar-distributed when K is all of SU(N) or U(N); otherwise the exponential
    of a wide Gaussian in k, which covers the connected group K.
    """
    N = s.N
    if s.k.dim in (N * N - 1, N * N):
        Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
        Q, R = np.linalg.qr(Z)
        Q = Q * (np.diag(R) / np.abs(np.diag(R)))
        if s.k.dim == N * N - 1:
            Q = Q / np.linalg.det(Q) ** (1.0 / N)
        return Q
    return matexp(s.k.random_element(rng, scale=np.pi * np.sqrt(max(1, s.k.dim))))


def random_point(s: Scenario, rng: np.random.Generator, xi_max: float = 2.0) -> GroupPoint:
    """Random k from random_unitary_part and random xi in p with |xi| <= xi_max."""
    k = random_unitary_part(s, rng)
    xi = s.p.random_element(rng)
    n = frob(xi)
    if n > 0:
        xi = xi / n * xi_max * rng.uniform() ** (1.0 / max(1, s.p.dim))
    return GroupPoint.from_factors(k, xi)


# ---------------------------------------------------------------------------
# JSON serialization

def matrix_to_json(M: np.ndarray) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def matrix_from_json(obj) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"matrix is not a nested array of [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise ScenarioError(f"bad matrix shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def involution_from_json(obj: dict, N: int) -> InvolutionSpec:
    if not isinstance(obj, dict) or "A" not in obj:
        raise ScenarioError("involution needs a conjugator 'A'")
    A = matrix_from_json(obj["A"])
    if A.shape != (N, N):
        raise ScenarioError(f"conjugator shape {A.shape} does not match N={N}")
    if abs(np.linalg.det(A)) < 1e-12:
        raise ScenarioError("conjugator is singular")
    return InvolutionSpec(A, bool(obj.get("antiholomorphic", False)), bool(obj.get("outer", False)))


def scenario_from_json(obj: dict) -> Scenario:
    from .presets import preset

    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    if "preset" in obj:
        return preset(obj["preset"])
    try:
        N = int(obj["N"])
        basis = [matrix_from_json(m) for m in obj["algebra_basis"]]
        s1 = involution_from_json(obj["sigma1"], N)
        s2 = involution_from_json(obj["sigma2"], N)
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc}") from exc
    if any(b.shape != (N, N) for b in basis):
        raise ScenarioError("algebra basis matrices do not match N")
    name = str(obj.get("name", "custom"))
    group = ReductiveGroupData(N, RealSubspace.span(basis, N), name)
    return Scenario(group, s1, s2, name)


def scenario_to_json(s: Scenario) -> dict:
    return {"name": s.name, "N": s.N,
            "algebra_basis": [matrix_to_json(b) for b in s.g.basis],
            "sigma1": s.sigma1.to_json(), "sigma2": s.sigma2.to_json()}
