"""Fundamental and standard Cartan subsets, torus reduction, extended weights,
normal forms, classification of Cartan subsets and their Weyl groups."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np
from scipy.optimize import least_squares

from . import numkernel as nk
from .errors import (BudgetExhausted, ExtensionStalled, InternalInconsistency, LatticeTooCoarse,
                     NotInZeroFiber, NotReduced)
from .gradmap import in_zero_fiber, tau_x_matrix
from .liegroup import GroupPoint, Scenario, matrix_to_json
from .numkernel import RealSubspace, bracket, frob, matexp
from .symmpair import maximal_abelian_extension


# ---------------------------------------------------------------------------
# fundamental Cartan subset

@dataclass
class FundamentalCartanData:
    t0: RealSubspace
    a0: RealSubspace
    seed: int = 0

    @property
    def c0(self) -> RealSubspace:
        return nk.subspace_sum(self.t0, self.a0)

    @property
    def dims(self) -> tuple[int, int]:
        return self.t0.dim, self.a0.dim


def fundamental_cartan(s: Scenario, seed: int = 0) -> FundamentalCartanData:
    """t0 maximal abelian in k^{-σ2} ∩ k^{-σ1}, a0 maximal abelian in its
    centralizer inside p^{-σ2} ∩ p^{-σ1}; both certified by centralizer ranks."""
    def build():
        rng = np.random.default_rng(seed)
        kk = nk.intersect(s.ks(2, -1), s.ks(1, -1))
        pp = nk.intersect(s.ps(2, -1), s.ps(1, -1))
        zero = RealSubspace.zero(s.N)
        t0, _ = maximal_abelian_extension([], [], kk, zero, rng)
        pool = nk.centralizer(t0.basis, pp)
        _, a0 = maximal_abelian_extension([], [], zero, pool, rng)
        if nk.centralizer(t0.basis, kk).dim != t0.dim:
            raise ExtensionStalled("t0 is not maximal abelian")
        c0 = nk.subspace_sum(t0, a0)
        g_minus = nk.intersect(s.gs(2, -1), s.gs(1, -1))
        if nk.centralizer(c0.basis, g_minus).dim != c0.dim:
            raise ExtensionStalled("c0 is not maximal abelian")
        return FundamentalCartanData(t0, a0, seed)
    return s.cached(("fundamental", seed), build)


# ---------------------------------------------------------------------------
# the torus T0 = exp(t0) and its period lattice

@dataclass
class TorusCoords:
    """Coordinates on t0 (orthonormal basis) with the exp-kernel data.

    phases[r] is the r-th simultaneous eigenvalue of -i·(basis element);
    exp(sum c_j b_j) = 1 iff phases @ c ∈ 2πZ^N.  ``box`` spans a region
    containing a fundamental domain of the period lattice:
    c = box @ u with u ∈ [0, 1)^d.
    """
    t0: RealSubspace
    phases: np.ndarray
    box: np.ndarray

    @property
    def dim(self) -> int:
        return self.t0.dim

    def element(self, c: np.ndarray) -> np.ndarray:
        return self.t0.from_coords(c)

    def coords(self, eta: np.ndarray) -> np.ndarray:
        return self.t0.coords(eta)

    def is_period(self, c: np.ndarray, tol: float = 1e-8) -> bool:
        v = self.phases @ c / (2 * np.pi)
        return bool(np.all(np.abs(v - np.round(v)) < tol))


def torus_coords(t0: RealSubspace, max_den: int = 12) -> TorusCoords:
    d = t0.dim
    if d == 0:
        return TorusCoords(t0, np.zeros((t0.N, 0)), np.zeros((0, 0)))
    rng = np.random.default_rng(0)
    Z = t0.random_element(rng)
    _, U = np.linalg.eigh(-1j * Z)
    phases = np.array([np.real(np.diag(U.conj().T @ (-1j * b) @ U)) for b in t0.basis]).T
    # choose d independent rows with the smallest covolume, express the rest
    best = None
    for rows in itertools.combinations(range(phases.shape[0]), d):
        B = phases[list(rows)]
        det = abs(np.linalg.det(B))
        if det > 1e-8 and (best is None or det < best[0]):
            best = (det, B)
    if best is None:
        raise InternalInconsistency("t0 phases do not span")
    B = best[1]
    R = phases @ np.linalg.inv(B)
    den = 1
    for r in R.ravel():
        f = Fraction(float(r)).limit_denominator(max_den)
        if abs(float(f) - r) > 1e-8:
            raise InternalInconsistency("torus T0 is not closed in the given coordinates")
        den = lcm(den, f.denominator)
    box = 2 * np.pi * den * np.linalg.inv(B)
    return TorusCoords(t0, phases, box)


# ---------------------------------------------------------------------------
# extended weights

@dataclass
class ExtendedWeight:
    lam: np.ndarray     # real functional on t0 coords: ad(eta) acts by i·lam(eta)
    a: complex          # tau eigenvalue
    space: np.ndarray   # complex basis in coordinates of ``part``
    part: str           # "k" or "p"

    @property
    def mult(self) -> int:
        return self.space.shape[1]


def extended_weights(s: Scenario, f: FundamentalCartanData) -> list[ExtendedWeight]:
    """Joint eigenspaces of ad(t0) and τ on k^C and on p^C."""
    def build():
        out = []
        for part, dom in (("k", s.k), ("p", s.p)):
            if dom.dim == 0:
                continue
            ops = [(lambda X, b=b: bracket(b, X)) for b in f.t0.basis] + [s.tau]
            total = 0
            for vals, Q in nk.simultaneous_eigensplit(ops, dom):
                lam = np.array([v.imag for v in vals[:-1]])
                if any(abs(v.real) > 1e-7 for v in vals[:-1]):
                    raise InternalInconsistency("ad(t0) has non-imaginary eigenvalues")
                a = vals[-1]
                if abs(abs(a) - 1) > 1e-7:
                    raise InternalInconsistency("tau eigenvalue off the unit circle")
                out.append(ExtendedWeight(lam, a / abs(a), Q, part))
                total += Q.shape[1]
            if total != dom.dim:
                raise InternalInconsistency(f"extended weight spaces of {part} do not cover it")
        return out
    return s.cached(("extweights", np.asarray(f.t0.basis).tobytes()), build)


def selected(weights: list[ExtendedWeight], c: np.ndarray, tol: float = 1e-8) -> list[int]:
    """Indices of extended weights with a·e^{2iλ(η)} = 1."""
    return [i for i, w in enumerate(weights)
            if abs(w.a * np.exp(2j * (w.lam @ c)) - 1) < tol]


def pattern_matrix(weights: list[ExtendedWeight], C: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Boolean (points × weights) table of the selection rule, vectorized."""
    if not weights:
        return np.zeros((C.shape[0], 0), bool)
    L = np.array([w.lam for w in weights])
    a = np.array([w.a for w in weights])
    return np.abs(a[None, :] * np.exp(2j * (C @ L.T)) - 1) < tol


def snap_to_walls(weights: list[ExtendedWeight], c: np.ndarray, tol: float = 1e-5) -> np.ndarray:
    """Move c (t0 coords) onto the walls a·e^{2iλ(c)} = 1 it nearly lies on.

    The minimum-norm correction solves 2λ(δ) = 2πm − arg a − 2λ(c) for every
    nearly satisfied weight.  Torus reduction is accurate to ~1e-8, and points
    of non-fundamental classes reduce onto walls exactly.
    """
    rows, rhs = [], []
    for w in weights:
        if np.linalg.norm(w.lam) < 1e-9:
            continue
        phase = 2 * (w.lam @ c) + np.angle(w.a)
        m = np.round(phase / (2 * np.pi))
        if abs(phase - 2 * np.pi * m) < tol:
            rows.append(2 * w.lam)
            rhs.append(2 * np.pi * m - phase)
    if not rows:
        return c
    delta = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    return c + delta


def _direct_intersections(s: Scenario, k: np.ndarray) -> tuple[RealSubspace, RealSubspace]:
    ki = k.conj().T
    A1k = s.ks(1, 1).image(lambda X: ki @ X @ k)
    A1p = s.ps(1, -1).image(lambda X: ki @ X @ k)
    return nk.intersect(s.ks(2, 1), A1k), nk.intersect(s.ps(2, -1), A1p)


def _weight_route(s: Scenario, weights: list[ExtendedWeight], c: np.ndarray,
                  tol: float) -> tuple[RealSubspace, RealSubspace]:
    idx = selected(weights, c, tol)
    out = []
    for part, dom, sign in (("k", s.k, 1), ("p", s.p, -1)):
        cols = [weights[i].space for i in idx if weights[i].part == part]
        if not cols or dom.dim == 0:
            out.append(RealSubspace.zero(s.N))
            continue
        Q = np.hstack(cols)
        S2 = dom.operator_matrix(s.sigma2)
        P = (np.eye(dom.dim) + sign * S2) / 2
        V = nk.orthonormalize(P @ Q, tol=1e-7)
        R = nk.realify(V) if V.shape[1] else np.zeros((dom.dim, 0))
        out.append(RealSubspace.from_columns(dom.vecs @ R, s.N))
    return out[0], out[1]


def intersection_algebras(s: Scenario, f: FundamentalCartanData, eta: np.ndarray,
                          tol: float = 1e-8) -> tuple[RealSubspace, RealSubspace]:
    """k^{σ2} ∩ Ad(k^-1)k^{σ1} and p^{-σ2} ∩ Ad(k^-1)p^{-σ1} for k = exp(eta).

    Computed by the extended-weight selection and by direct intersection; the
    two must agree in dimension and position.
    """
    c = f.t0.coords(eta)
    if f.t0.residual(eta) > 1e-8 * (1 + frob(eta)):
        raise InternalInconsistency("eta is not in t0")
    weights = extended_weights(s, f)
    kw, pw = _weight_route(s, weights, c, tol)
    kd, pd = _direct_intersections(s, matexp(eta))
    for name, a, b in (("k", kw, kd), ("p", pw, pd)):
        if a.dim != b.dim:
            raise InternalInconsistency(f"{name}-intersection dims differ: weights {a.dim}, direct {b.dim}")
        if a.dim and nk.subspace_distance(a, b) > 1e-8:
            raise InternalInconsistency(f"{name}-intersection subspaces differ")
    return kd, pd


# ---------------------------------------------------------------------------
# reduction of the unitary part to T0

@dataclass
class TorusReduction:
    k1: np.ndarray
    k2: np.ndarray
    eta: np.ndarray
    residual: float
    restarts: int


def _reduction_residual(s: Scenario, f: FundamentalCartanData, k: np.ndarray):
    K1, K2 = s.ks(1, 1), s.ks(2, 1)
    d1, d2 = K1.dim, K2.dim

    def unpack(z):
        return K1.from_coords(z[:d1]), K2.from_coords(z[d1:d1 + d2]), f.t0.from_coords(z[d1 + d2:])

    def res(z):
        X1, X2, eta = unpack(z)
        D = matexp(X1) @ k @ matexp(-X2) - matexp(eta)
        return np.concatenate([D.real.ravel(), D.imag.ravel()])
    return res, unpack, d1 + d2 + f.t0.dim


def reduce_to_torus(s: Scenario, f: FundamentalCartanData, k: np.ndarray, seed: int = 0,
                    restarts: int = 30, tol: float = 1e-14) -> TorusReduction:
    """(k1, k2, eta) with k1·k·k2^-1 = exp(eta), k_j ∈ K_j, eta ∈ t0.

    Nonlinear least squares over (log k1, log k2, eta) with random restarts.
    """
    res, unpack, n = _reduction_residual(s, f, k)
    if f.t0.dim == 0 and s.ks(1, 1).dim + s.ks(2, 1).dim == 0:
        r = float(np.sum(res(np.zeros(0)) ** 2))
        if r > tol:
            raise NotReduced("nothing to vary and k is not the identity", np.eye(s.N), 0)
        return TorusReduction(np.eye(s.N), np.eye(s.N), np.zeros((s.N, s.N), complex), r, 0)
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(restarts):
        z0 = np.zeros(n) if attempt == 0 else rng.normal(scale=1.5, size=n)
        sol = least_squares(res, z0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=4000)
        r = float(np.sum(sol.fun ** 2))
        if best is None or r < best[0]:
            best = (r, sol.x)
        if r < tol:
            X1, X2, eta = unpack(sol.x)
            return TorusReduction(matexp(X1), matexp(X2), eta, r, attempt)
    X1, X2, eta = unpack(best[1])
    raise NotReduced(f"torus reduction stuck at residual {best[0]:.3e}",
                     TorusReduction(matexp(X1), matexp(X2), eta, best[0], restarts), restarts)


# ---------------------------------------------------------------------------
# standard Cartan subsets and the normal form

@dataclass
class StandardCartanSubset:
    n: np.ndarray
    eta_n: np.ndarray         # n = exp(eta_n), eta_n ∈ t0
    t: RealSubspace
    a: RealSubspace
    class_id: int | None = None
    invariants: tuple = ()

    @property
    def c(self) -> RealSubspace:
        return nk.subspace_sum(self.t, self.a)

    @property
    def dims(self) -> tuple[int, int]:
        return self.t.dim, self.a.dim

    def point(self, eta: np.ndarray) -> GroupPoint:
        """n·exp(eta) as a GroupPoint; eta = eta_t + eta_a with eta_a in p."""
        eta_t, eta_a = self.t.project(eta), self.a.project(eta)
        return GroupPoint.from_factors(self.n @ matexp(eta_t), eta_a)

    def to_json(self) -> dict:
        return {"class_id": self.class_id, "dim_t": self.t.dim, "dim_a": self.a.dim,
                "n": matrix_to_json(self.n),
                "t_basis": [matrix_to_json(B) for B in self.t.basis],
                "a_basis": [matrix_to_json(B) for B in self.a.basis],
                "invariants": [float(v) if isinstance(v, float) else v for v in self.invariants]}


def _ascend_into(kk: RealSubspace, xi: np.ndarray, rho: np.ndarray,
                 max_iters: int = 2000, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """h ∈ exp(kk) maximizing <Ad(h)xi, rho>; returns (h, Ad(h)xi)."""
    h = np.eye(xi.shape[0], dtype=complex)
    cur = xi
    step = 1.0 / max(1e-12, frob(rho) * frob(xi))
    for _ in range(max_iters):
        G = kk.project(bracket(rho, cur))
        g2 = frob(G) ** 2
        if np.sqrt(g2) < tol * (1 + frob(rho) * frob(xi)):
            break
        f0 = nk.inner(cur, rho)
        # a strict sufficient-increase constant rejects overshooting steps;
        # with 1e-4 the iteration settles in a slowly contracting 2-cycle
        s = 2 * step
        while s > 1e-16:
            u = matexp(s * G)
            cand = u @ cur @ u.conj().T
            if nk.inner(cand, rho) >= f0 + 0.4 * s * g2:
                break
            s *= 0.5
        else:
            break
        step = s
        h = u @ h
        cur = cand
    return h, cur


@dataclass
class NormalForm:
    k1: np.ndarray
    k2: np.ndarray
    C: StandardCartanSubset
    eta: np.ndarray           # point of c with k1·x·k2^-1 = n·exp(eta)
    residual: float


def cartan_at_torus_point(s: Scenario, f: FundamentalCartanData, eta: np.ndarray,
                          seed: int = 0) -> tuple[StandardCartanSubset, RealSubspace, RealSubspace]:
    """The standard Cartan subset through exp(eta), eta ∈ t0, with maximal a ⊃ a0.

    Returns (C, kk, pp) with kk, pp the intersection algebras at exp(eta).
    """
    kk, pp = intersection_algebras(s, f, eta)
    rng = np.random.default_rng(seed)
    zero = RealSubspace.zero(s.N)
    _, a = maximal_abelian_extension([], list(f.a0.basis), zero, pp, rng)
    t = nk.centralizer(a.basis, f.t0)
    eta_t = t.project(eta)
    eta_n = eta - eta_t
    C = StandardCartanSubset(matexp(eta_n), eta_n, t, a)
    c0dim = f.t0.dim + f.a0.dim
    if t.dim + a.dim != c0dim:
        raise InternalInconsistency(f"Cartan subset dim {t.dim + a.dim} != dim c0 {c0dim}")
    return C, kk, pp


def normalize_to_cartan(s: Scenario, f: FundamentalCartanData, x: GroupPoint,
                        seed: int = 0, check_fiber: bool = True,
                        snap_tol: float = 1e-5) -> NormalForm:
    """(k1, k2) ∈ K1 × K2 and a standard Cartan subset C with k1·x·k2^-1 ∈ C.

    snap_tol is the wall-snapping radius for the torus part; callers with
    points only near the zero fiber widen it, and the log part is then
    projected onto the intersection space of the snapped torus point.
    """
    if check_fiber and not in_zero_fiber(s, x):
        raise NotInZeroFiber("point is not in the zero fiber")
    red = reduce_to_torus(s, f, x.k, seed)
    c_raw = f.t0.coords(red.eta)
    c_snap = snap_to_walls(extended_weights(s, f), c_raw, snap_tol)
    eta = f.t0.from_coords(c_snap)
    xi = red.k2 @ x.xi @ red.k2.conj().T
    C, kk, pp = cartan_at_torus_point(s, f, eta, seed)
    moved = float(np.linalg.norm(c_snap - c_raw))
    if pp.residual(xi) > max(1e-6, 10 * moved) * (1 + frob(xi)):
        raise InternalInconsistency("log part left the intersection p-space after reduction")
    xi = pp.project(xi)
    h = np.eye(s.N, dtype=complex)
    if frob(xi) > 0 and C.a.dim:
        rng = np.random.default_rng(seed + 1)
        rho = C.a.random_element(rng)
        h, xi = _ascend_into(kk, xi, rho)
        if C.a.residual(xi) > 1e-7 * (1 + frob(xi)):
            raise InternalInconsistency("conjugation into a did not converge")
        xi = C.a.project(xi)
    u = matexp(eta)
    k1 = u @ h @ u.conj().T @ red.k1
    k2 = h @ red.k2
    eta_c = C.t.project(eta) + xi
    target = C.n @ matexp(eta_c)
    r = frob(k1 @ x.value @ np.linalg.inv(k2) - target)
    return NormalForm(k1, k2, C, eta_c, r)


# ---------------------------------------------------------------------------
# class invariants and classification

def class_invariants(s: Scenario, C: StandardCartanSubset) -> tuple:
    """Invariants of the set C = n·exp(c) under K1 × K2.

    Joint eigenspaces of ad(c) and τ_n on g^C give roots α with τ-eigenvalues
    a.  A root is imaginary when it vanishes on a, real when it vanishes on t.
    Replacing n by n·exp(ζ), ζ ∈ t, multiplies a by e^{2α(ζ)}, so a is only
    recorded where α vanishes on t (zero weight and real roots).
    Key: (dim t, dim a, #real, #imaginary, #complex, a on zero weight, a on real roots).
    """
    c_basis = C.t.basis + C.a.basis
    for b in c_basis:
        if s.gs(2, -1).residual(b) > 1e-7:
            raise InternalInconsistency("Cartan subset direction is not in g^{-σ2}")
    x = GroupPoint(C.n, C.n, np.zeros_like(C.n))
    ops = [s.g.operator_matrix(lambda X, b=b: bracket(b, X)) for b in c_basis]
    ops.append(tau_x_matrix(s, x))
    dt = C.t.dim
    counts = [0, 0, 0]
    zero_a, real_a = [], []
    for vals, Q in nk.simultaneous_eigensplit(ops, radius=1e-6):
        lam = np.array(vals[:-1])
        vt = np.linalg.norm(lam[:dt].imag) + np.linalg.norm(lam[:dt].real)
        va = np.linalg.norm(lam[dt:].real) + np.linalg.norm(lam[dt:].imag)
        a = np.round(np.angle(vals[-1]) / np.pi, 6) % 2.0
        m = Q.shape[1]
        if vt < 1e-7 and va < 1e-7:
            zero_a += [float(a)] * m
        elif vt < 1e-7:
            counts[0] += m
            real_a += [float(a)] * m
        elif va < 1e-7:
            counts[1] += m
        else:
            counts[2] += m
    return (dt, C.a.dim, *counts, tuple(sorted(zero_a)), tuple(sorted(real_a)))


@dataclass
class Hyperplane:
    normal: np.ndarray   # 2·λ in t0 coords
    offset: float        # 2πm − arg a


def _hyperplanes(weights: list[ExtendedWeight], tc: TorusCoords) -> list[Hyperplane]:
    seen, out = set(), []
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=tc.dim))) @ tc.box.T
    for w in weights:
        if np.linalg.norm(w.lam) < 1e-9:
            continue
        phi = float(np.angle(w.a))
        vals = 2 * corners @ w.lam + phi
        for m in range(int(np.floor(vals.min() / (2 * np.pi))), int(np.ceil(vals.max() / (2 * np.pi))) + 1):
            key = tuple(np.round(np.r_[2 * w.lam, 2 * np.pi * m - phi], 7))
            neg = tuple(-v for v in key)
            if key in seen or neg in seen:
                continue
            seen.add(key)
            out.append(Hyperplane(2 * w.lam, 2 * np.pi * m - phi))
    return out


def _flat_points(planes: list[Hyperplane], tc: TorusCoords, rng: np.random.Generator,
                 max_combos: int = 200_000) -> np.ndarray:
    """Points on every intersection of up to dim t0 independent walls, wrapped into the box."""
    d = tc.dim
    pts = []
    binv = np.linalg.inv(tc.box)
    count = 0
    for r in range(1, d + 1):
        for combo in itertools.combinations(planes, r):
            count += 1
            if count > max_combos:
                raise LatticeTooCoarse("too many wall intersections to enumerate")
            A = np.array([p.normal for p in combo])
            b = np.array([p.offset for p in combo])
            if np.linalg.matrix_rank(A, tol=1e-9) < r:
                continue
            c = np.linalg.lstsq(A, b, rcond=None)[0]
            if r < d:
                null = np.linalg.svd(A)[2][r:]
                c = c + null.T @ rng.uniform(-1, 1, size=d - r) * np.linalg.norm(tc.box)
            pts.append(c)
    if not pts:
        return np.zeros((0, d))
    P = np.array(pts)
    U = (P @ binv.T) % 1.0
    return U @ tc.box.T


def _patterns(weights, points: np.ndarray) -> dict:
    table = pattern_matrix(weights, points)
    out = {}
    for i in range(points.shape[0]):
        key = frozenset(np.flatnonzero(table[i]).tolist())
        if key not in out:
            out[key] = points[i]
    return out


def pattern_representatives(s: Scenario, f: FundamentalCartanData, seed: int = 0,
                            resolution: int = 32, max_resolution: int | None = None) -> dict:
    """Distinct selection patterns Λ̃(η) over t0 with one representative each.

    A lattice over the box is refined ×2 until the pattern set is unchanged
    for two consecutive refinements; walls and their intersections are added
    at every resolution.
    """
    tc = torus_coords(f.t0)
    d = tc.dim
    weights = extended_weights(s, f)
    if d == 0:
        return {frozenset(): np.zeros(0)}
    if max_resolution is None:
        max_resolution = {1: 4096, 2: 256}.get(d, 64)
    rng = np.random.default_rng(seed)
    flats = _flat_points(_hyperplanes(weights, tc), tc, rng)
    history = []
    r = resolution
    while True:
        axes = [(np.arange(r) + 0.5) / r] * d
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        pts = np.vstack([U @ tc.box.T, flats])
        pats = _patterns(weights, pts)
        history.append(set(pats))
        if len(history) >= 3 and history[-1] == history[-2] == history[-3]:
            return pats
        r *= 2
        if r > max_resolution:
            raise LatticeTooCoarse(f"patterns not stable up to resolution {max_resolution}")


def classify_cartan_sets(s: Scenario, seed: int = 0) -> list[StandardCartanSubset]:
    """Representatives of the equivalence classes of standard Cartan subsets.

    Classes are separated by class_invariants; class ids follow the sorted
    invariant keys, so the table does not depend on the seed.
    """
    f = fundamental_cartan(s)
    tc = torus_coords(f.t0)
    reps = pattern_representatives(s, f, seed)
    by_key: dict[tuple, StandardCartanSubset] = {}
    # wall points first in a fixed order so representatives are reproducible
    order = sorted(reps.items(), key=lambda kv: (len(kv[0]), tuple(np.round(kv[1], 9))))
    for pat, c in order:
        eta = tc.element(c)
        C, _, _ = cartan_at_torus_point(s, f, eta, seed)
        key = class_invariants(s, C)
        if key not in by_key:
            by_key[key] = C
    out = []
    for i, key in enumerate(sorted(by_key)):
        C = by_key[key]
        C.class_id = i
        C.invariants = key
        out.append(C)
    return out


def class_of(s: Scenario, C: StandardCartanSubset, table: list[StandardCartanSubset]) -> int | None:
    key = class_invariants(s, C)
    for D in table:
        if D.invariants == key:
            return D.class_id
    return None


# ---------------------------------------------------------------------------
# Weyl groups

@dataclass
class AffineMap:
    """zeta ↦ L·zeta + b on c-coordinates (t-basis then a-basis)."""
    L: np.ndarray
    b: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.L @ z + self.b

    def compose(self, other: "AffineMap") -> "AffineMap":
        return AffineMap(self.L @ other.L, self.L @ other.b + self.b)

    def to_json(self) -> dict:
        return {"linear": self.L.tolist(), "translation": self.b.tolist()}


@dataclass
class WeylGroupReport:
    order: int
    elements: list[AffineMap]
    generators: list[AffineMap]
    complete: bool
    samples: int
    hits: int

    def to_json(self) -> dict:
        return {"order": self.order, "complete": self.complete, "samples": self.samples,
                "hits": self.hits, "generators": [g.to_json() for g in self.generators]}


def _same_map(C: StandardCartanSubset, u: AffineMap, v: AffineMap, tol: float = 1e-6) -> bool:
    """Equal as maps of C: same linear part, translations differ by a period of n·exp(t)."""
    if np.max(np.abs(u.L - v.L)) > tol:
        return False
    d = u.b - v.b
    dt = C.t.dim
    if np.linalg.norm(d[dt:]) > tol:
        return False
    return frob(matexp(C.t.from_coords(d[:dt])) - np.eye(C.n.shape[0])) < tol


def _c_coords(C: StandardCartanSubset, X: np.ndarray) -> np.ndarray:
    return np.r_[C.t.coords(X), C.a.coords(X)]


def _c_element(C: StandardCartanSubset, z: np.ndarray) -> np.ndarray:
    dt = C.t.dim
    return C.t.from_coords(z[:dt]) + C.a.from_coords(z[dt:])


def _induced_map(s: Scenario, C: StandardCartanSubset, g1: np.ndarray, g2: np.ndarray,
                 z0: np.ndarray, z1: np.ndarray, delta: float = 1e-3) -> AffineMap | None:
    """Affine map on c-coordinates induced by (g1, g2), known to send z0 to z1."""
    from scipy.linalg import logm
    d = z0.size
    g2i = np.linalg.inv(g2)
    base = np.linalg.inv(C.n @ matexp(_c_element(C, z1)))
    cols = []
    for j in range(d):
        dz = np.zeros(d)
        dz[j] = delta
        imgs = []
        for sgn in (1, -1):
            y = g1 @ C.n @ matexp(_c_element(C, z0 + sgn * dz)) @ g2i
            M = base @ y
            Z = logm(M)
            if C.c.residual(Z) > 1e-6 * (1 + frob(Z)):
                return None
            imgs.append(_c_coords(C, Z))
        cols.append((imgs[0] - imgs[1]) / (2 * delta))
    L = np.array(cols).T
    U, _, Vt = np.linalg.svd(L)
    L = U @ Vt
    return AffineMap(L, z1 - L @ z0)


def _closure(C: StandardCartanSubset, gens: list[AffineMap], cap: int) -> list[AffineMap] | None:
    d = C.t.dim + C.a.dim
    elems = [AffineMap(np.eye(d), np.zeros(d))]
    frontier = list(elems)
    while frontier:
        new = []
        for u in frontier:
            for g in gens:
                w = g.compose(u)
                if not any(_same_map(C, w, v) for v in elems):
                    elems.append(w)
                    new.append(w)
                    if len(elems) > cap:
                        return None
        frontier = new
    return elems


def _weyl_search(s: Scenario, C: StandardCartanSubset, x: np.ndarray, rng: np.random.Generator,
                 tol: float = 1e-20):
    """One LM run for (k1, k2, z) with k1·x·k2^-1 = n·exp(z), z ∈ c; None on failure."""
    K1, K2 = s.ks(1, 1), s.ks(2, 1)
    d1, d2, d = K1.dim, K2.dim, C.t.dim + C.a.dim

    def unpack(v):
        return K1.from_coords(v[:d1]), K2.from_coords(v[d1:d1 + d2]), v[d1 + d2:]

    def res(v):
        X1, X2, z = unpack(v)
        D = matexp(X1) @ x @ matexp(-X2) - C.n @ matexp(_c_element(C, z))
        return np.concatenate([D.real.ravel(), D.imag.ravel()])

    v0 = np.r_[rng.normal(scale=1.5, size=d1 + d2), rng.normal(scale=1.0, size=d)]
    sol = least_squares(res, v0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=3000)
    if float(np.sum(sol.fun ** 2)) > tol:
        return None
    X1, X2, z = unpack(sol.x)
    return matexp(X1), matexp(X2), z


def weyl_group(s: Scenario, C: StandardCartanSubset, seed: int = 0, budget: int = 80,
               cap: int = 512) -> WeylGroupReport:
    """Elements of N_{K1×K2}(C)/Z_{K1×K2}(C) as affine maps of c-coordinates.

    Random starts of a least-squares search for (k1, k2) moving a probe point
    of C back into C; each solution induces an affine map, and the maps found
    are closed under composition.  The search is complete when the second
    half of the budget adds nothing to the closure.
    """
    rng = np.random.default_rng(seed)
    d = C.t.dim + C.a.dim
    ident = AffineMap(np.eye(d), np.zeros(d))
    if d == 0:
        return WeylGroupReport(1, [ident], [], True, 0, 0)
    z0 = np.r_[rng.uniform(-1.5, 1.5, C.t.dim), rng.normal(scale=0.3, size=C.a.dim)]
    x = C.point(_c_element(C, z0)).value
    gens: list[AffineMap] = []
    elems = [ident]
    hits = 0
    last_growth = 0
    for trial in range(budget):
        found = _weyl_search(s, C, x, rng)
        if found is None:
            continue
        g1, g2, z1 = found
        m = _induced_map(s, C, g1, g2, z0, z1)
        if m is None:
            continue
        hits += 1
        if not any(_same_map(C, m, v) for v in elems):
            gens.append(m)
            grown = _closure(C, gens, cap)
            if grown is None:
                raise BudgetExhausted("Weyl group closure exceeded the cap", elems)
            elems = grown
            last_growth = trial
    complete = last_growth < budget // 2
    report = WeylGroupReport(len(elems), elems, gens, complete, budget, hits)
    if not complete:
        raise BudgetExhausted(f"Weyl group still growing; order >= {len(elems)}", report)
    return report
