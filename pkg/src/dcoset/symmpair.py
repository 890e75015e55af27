"""Adjoint action of H = G^sigma on q for a reductive symmetric pair (g, sigma).

Every slice representation of the double-coset action is of this form: at a
zero-fiber point x the pair is (h^x ⊕ q^x, sigma2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkernel as nk
from .errors import AlreadyClosed, ExtensionStalled, IllConditioned, NotInvariant
from .liegroup import Scenario, involution_split, theta
from .numkernel import RealSubspace, bracket, dagger, frob


@dataclass(frozen=True, eq=False)
class SymmetricPairData:
    g: RealSubspace
    sigma: object  # callable involution of g
    h: RealSubspace
    q: RealSubspace
    hk: RealSubspace
    hp: RealSubspace
    qk: RealSubspace
    qp: RealSubspace

    @property
    def N(self) -> int:
        return self.g.N

    def center(self) -> RealSubspace:
        return nk.centralizer(self.g.basis, self.g)


def symmetric_pair(g: RealSubspace, sigma, h: RealSubspace | None = None,
                   q: RealSubspace | None = None, tol: float | None = None) -> SymmetricPairData:
    """Build the pair; h and q may be supplied when they are already known."""
    if h is None or q is None:
        h, q = involution_split(sigma, g, tol)
    hk, hp = involution_split(theta, h, tol)
    qk, qp = involution_split(theta, q, tol)
    return SymmetricPairData(g, sigma, h, q, hk, hp, qk, qp)


def slice_pair(s: Scenario, sd) -> SymmetricPairData:
    """Pair (h^x ⊕ q^x, sigma2) from the isotropy data of a zero-fiber point."""
    g = nk.subspace_sum(sd.hx, sd.qx)
    return symmetric_pair(g, s.sigma2, sd.hx, sd.qx, tol=nk.TOL.eps_member)


def pair_residual(pair: SymmetricPairData) -> float:
    """Largest violation of [h,h] ⊂ h, [h,q] ⊂ q, [q,q] ⊂ h."""
    worst = 0.0
    hb, qb = pair.h.basis, pair.q.basis
    for A in hb:
        for B in hb:
            worst = max(worst, pair.h.residual(bracket(A, B)))
        for B in qb:
            worst = max(worst, pair.q.residual(bracket(A, B)))
    for A in qb:
        for B in qb:
            worst = max(worst, pair.h.residual(bracket(A, B)))
    return worst


# ---------------------------------------------------------------------------
# Jordan decomposition and closedness

def _check_in_q(pair: SymmetricPairData, xi: np.ndarray) -> None:
    if pair.q.residual(xi) > nk.TOL.eps_member * (1.0 + frob(xi)):
        raise NotInvariant("element is not in q")


def jordan_chevalley(pair: SymmetricPairData, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """xi = xi_s + xi_n with commuting semisimple and nilpotent parts in q.

    Computed in the defining representation by spectral projectors onto
    clustered generalized eigenspaces.  Clustering uses eps_jordan because
    defective eigenvalues are only resolved to roughly eps^(1/m).
    """
    xi = np.asarray(xi, dtype=complex)
    _check_in_q(pair, xi)
    scale = frob(xi)
    if scale == 0.0:
        return xi.copy(), np.zeros_like(xi)
    radius = nk.TOL.eps_jordan
    S, _, centers = nk.jordan_decomposition(xi, radius, return_centers=True)
    if nk.cluster_separation(centers) < 10 * radius * max(1.0, np.linalg.norm(xi, 2)):
        raise IllConditioned("eigenvalue clusters of xi are too close")
    xs = pair.q.project(S)
    if frob(xs - S) > nk.TOL.eps_member * (1.0 + scale):
        raise IllConditioned("semisimple part left q")
    xn = xi - xs
    nn = frob(xn)
    if nn > nk.TOL.eps_nilzero * (1.0 + scale):
        N = xi.shape[0]
        if frob(np.linalg.matrix_power(xn / nn, N)) > 1e-8:
            raise IllConditioned("nilpotent part is not nilpotent; eigenvalues were merged")
    if frob(bracket(xs, xn)) > 1e-9 * max(1.0, scale) ** 2:
        raise IllConditioned("Jordan parts do not commute")
    return xs, xn


def is_closed_orbit(pair: SymmetricPairData, xi: np.ndarray) -> bool:
    _, xn = jordan_chevalley(pair, xi)
    return frob(xn) < nk.TOL.eps_nilzero * (frob(xi) + 1.0)


def in_null_cone(pair: SymmetricPairData, xi: np.ndarray) -> bool:
    xs, _ = jordan_chevalley(pair, xi)
    z = pair.center()
    xs = xs - z.project(xs) if z.dim else xs
    return frob(xs) < nk.TOL.eps_nilzero * (frob(xi) + 1.0)


def theta_parts(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(anti-Hermitian part, Hermitian part)."""
    return (xi - dagger(xi)) / 2, (xi + dagger(xi)) / 2


def phi_H(pair: SymmetricPairData, xi: np.ndarray) -> np.ndarray:
    """[xi_k, xi_p], an element of h ∩ p; zero exactly on the zero fiber."""
    xk, xp = theta_parts(xi)
    return pair.hp.project(bracket(xk, xp)) if pair.hp.dim else np.zeros_like(xi)


@dataclass
class PhiHFlow:
    xi: np.ndarray
    converged: bool
    iters: int
    rel_norms: list = field(default_factory=list)
    charpoly_drift: float = 0.0


def phi_H_flow(pair: SymmetricPairData, xi: np.ndarray, max_iters: int = 600,
               tol: float = 1e-8, damping: float = 1e-2, armijo_c: float = 1e-4,
               shrink: float = 0.5) -> PhiHFlow:
    """Descent of the norm |Ad(h)xi|^2 over h in exp(h ∩ p).

    Steps are xi <- Ad(exp(-s beta)) xi where beta is phi_H(xi) preconditioned
    by the damped Gauss-Newton matrix (4 <[Y_i,xi],[Y_j,xi]> + damping·I) on
    h ∩ p, with Armijo backtracking on the norm.  xi is scaled to unit norm
    first.  Convergence means |phi_H| <= tol·|xi|^2.  On closed orbits the
    minimum is attained and convergence is fast; towards a boundary orbit the
    preconditioned step shrinks like |xi_n|^2 / damping, decay is algebraic,
    and the budget runs out.  That contrast is the flow verdict.
    """
    n0 = frob(xi)
    if n0 == 0.0:
        return PhiHFlow(np.zeros_like(xi), True, 0, [0.0])
    cur = np.asarray(xi, dtype=complex) / n0
    coeffs0 = np.poly(cur)
    hp = pair.hp.basis
    rel = []
    for it in range(max_iters + 1):
        beta = phi_H(pair, cur)
        rel.append(frob(beta) / frob(cur) ** 2)
        if rel[-1] <= tol:
            drift = float(np.max(np.abs(np.poly(cur) - coeffs0)))
            return PhiHFlow(cur * n0, True, it, rel, drift)
        if it == max_iters:
            break
        A = np.stack([nk.vec(bracket(Y, cur)) for Y in hp], axis=1)
        grad = 2.0 * A.T @ nk.vec(cur)
        H = 4.0 * A.T @ A + damping * np.eye(len(hp))
        step = np.linalg.solve(H, grad)
        Y = pair.hp.from_coords(step)
        f0 = frob(cur) ** 2
        slope = float(grad @ step)
        h = 1.0
        while h > 1e-14:
            cand = nk.hermitian_exp(-h * Y) @ cur @ nk.hermitian_exp(h * Y)
            if frob(cand) ** 2 <= f0 - armijo_c * h * slope:
                break
            # near the minimum the decrease of the norm drowns in rounding;
            # a clear drop of |phi_H| is accepted instead
            if frob(phi_H(pair, cand)) < 0.5 * frob(beta):
                break
            h *= shrink
        else:
            break
        cur = cand
    drift = float(np.max(np.abs(np.poly(cur) - coeffs0)))
    return PhiHFlow(cur * n0, False, len(rel) - 1, rel, drift)


def is_closed_by_flow(pair: SymmetricPairData, xi: np.ndarray, max_iters: int = 600) -> bool:
    return phi_H_flow(pair, xi, max_iters).converged


# ---------------------------------------------------------------------------
# Cartan subspaces and weights

@dataclass
class CartanSubspaceData:
    c: RealSubspace
    t: RealSubspace
    a: RealSubspace
    seed: int | None = None

    @property
    def ordered_basis(self) -> list[np.ndarray]:
        """t-basis followed by a-basis; weight vectors use this order."""
        return self.t.basis + self.a.basis

    @property
    def dim(self) -> int:
        return self.c.dim


def maximal_abelian_extension(start_k: list[np.ndarray], start_p: list[np.ndarray],
                              pool_k: RealSubspace, pool_p: RealSubspace,
                              rng: np.random.Generator, max_steps: int = 64):
    """Greedily extend commuting θ-split elements to a maximal abelian subspace.

    New elements are drawn at random from the centralizer inside pool_k or
    pool_p, orthogonal to what is already there.  Returns (t, a) subspaces.
    """
    N = pool_k.N
    tk = RealSubspace.span([X for X in start_k if frob(X) > 1e-12], N)
    ap = RealSubspace.span([X for X in start_p if frob(X) > 1e-12], N)
    for _ in range(max_steps):
        S = tk.basis + ap.basis
        zk = nk.orthocomplement(tk, nk.centralizer(S, pool_k))
        zp = nk.orthocomplement(ap, nk.centralizer(S, pool_p))
        if zk.dim == 0 and zp.dim == 0:
            return tk, ap
        pick_k = zp.dim == 0 or (zk.dim > 0 and rng.uniform() < zk.dim / (zk.dim + zp.dim))
        if pick_k:
            tk = RealSubspace.span(tk.basis + [zk.random_element(rng)], N)
        else:
            ap = RealSubspace.span(ap.basis + [zp.random_element(rng)], N)
    raise ExtensionStalled("abelian extension did not terminate")


def _polished_seed(pair: SymmetricPairData, xi: np.ndarray, rel: float = 1e-6):
    """θ-parts of a flowed element, made to commute exactly.

    The flow stops at |[xk, xp]| ~ 1e-8 |xi|^2; xp is projected onto the
    centralizer of xk in qp, whose kernel is separated from the rest of the
    spectrum of ad(xk) by many orders of magnitude for a generic start.
    """
    n = frob(xi)
    xk, xp = theta_parts(xi)
    xk, xp = pair.qk.project(xk), pair.qp.project(xp)
    start_k = [xk] if frob(xk) > rel * n else []
    if start_k:
        xp = nk.centralizer(start_k, pair.qp, tol=rel * max(1.0, n)).project(xp)
    start_p = [xp] if frob(xp) > rel * n else []
    return start_k, start_p


def cartan_subspace(pair: SymmetricPairData, seed: int = 0, retries: int = 20) -> CartanSubspaceData:
    """θ-stable Cartan subspace of q, started from a flowed random element."""
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        if pair.q.dim == 0:
            return CartanSubspaceData(pair.q, pair.q, pair.q, seed)
        xi = pair.q.random_element(rng)
        fl = phi_H_flow(pair, xi)
        if not fl.converged:
            continue
        # polish: the seed must commute to near roundoff
        fine = phi_H_flow(pair, fl.xi, max_iters=100, tol=1e-13)
        if fine.converged:
            fl = fine
        start_k, start_p = _polished_seed(pair, fl.xi)
        t, a = maximal_abelian_extension(start_k, start_p, pair.qk, pair.qp, rng)
        c = nk.subspace_sum(t, a)
        if nk.centralizer(c.basis, pair.q).dim == c.dim:
            return CartanSubspaceData(c, t, a, seed)
    raise ExtensionStalled("no certified Cartan subspace within the retry budget")


def coords_bracket(g: RealSubspace, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Complex-bilinear bracket on the complexification, in g-coordinates."""
    ur, ui = g.from_coords(u.real), g.from_coords(u.imag)
    vr, vi = g.from_coords(v.real), g.from_coords(v.imag)
    re = g.coords(bracket(ur, vr) - bracket(ui, vi))
    im = g.coords(bracket(ur, vi) + bracket(ui, vr))
    return re + 1j * im


@dataclass
class Weight:
    value: np.ndarray  # real vector on the ordered c-basis
    space: np.ndarray  # complex basis in g-coordinates

    @property
    def mult(self) -> int:
        return self.space.shape[1]


@dataclass
class WeightTable:
    weights: list[Weight]
    dim_t: int

    def nonzero(self, tol: float = 1e-8) -> list[Weight]:
        return [w for w in self.weights if np.max(np.abs(w.value)) > tol]

    def zero(self, tol: float = 1e-8) -> Weight | None:
        for w in self.weights:
            if np.max(np.abs(w.value), initial=0.0) <= tol:
                return w
        return None

    def values(self) -> list[np.ndarray]:
        return [w.value for w in self.weights]

    def evaluate(self, w: Weight, coords: np.ndarray) -> complex:
        """Eigenvalue of ad(eta) on g_w: imaginary on the t part, real on the a part."""
        k = self.dim_t
        return complex(1j * (w.value[:k] @ coords[:k]) + w.value[k:] @ coords[k:])


def _weight_vector(vals: tuple, dim_t: int) -> np.ndarray:
    out = []
    for i, z in enumerate(vals):
        out.append(z.imag if i < dim_t else z.real)
    return np.array(out)


def weight_decomposition(g: RealSubspace, t_basis: list[np.ndarray], a_basis: list[np.ndarray],
                         extra_ops: list[np.ndarray] | None = None, radius: float | None = None):
    """Joint eigenspaces of ad(t_i), ad(a_j) (and optional extra operators) on g^C."""
    ops = [g.operator_matrix(lambda X, H=H: bracket(H, X)) for H in t_basis + a_basis]
    ops += list(extra_ops or [])
    if not ops:
        return [((), np.eye(g.dim, dtype=complex))]
    return nk.simultaneous_eigensplit(ops, radius=radius)


def restricted_weights(pair: SymmetricPairData, cd: CartanSubspaceData, check: bool = True) -> WeightTable:
    raw = weight_decomposition(pair.g, cd.t.basis, cd.a.basis)
    table = WeightTable([Weight(_weight_vector(v, cd.t.dim), Q) for v, Q in raw], cd.t.dim)
    if sum(w.mult for w in table.weights) != pair.g.dim:
        raise IllConditioned("weight spaces do not cover g")
    if check:
        _check_weights(pair, table)
    return table


def _find(table: WeightTable, value: np.ndarray, tol: float = 1e-7) -> Weight | None:
    for w in table.weights:
        if np.max(np.abs(w.value - value), initial=0.0) < tol:
            return w
    return None


def _check_weights(pair: SymmetricPairData, table: WeightTable) -> None:
    Sg = pair.g.operator_matrix(pair.sigma)
    for w in table.weights:
        neg = _find(table, -w.value)
        if neg is None or neg.mult != w.mult:
            raise IllConditioned("weights are not symmetric under negation")
        img = Sg @ w.space
        resid = img - neg.space @ (neg.space.conj().T @ img)
        if np.linalg.norm(resid) > 1e-7 * max(1.0, np.linalg.norm(img)):
            raise IllConditioned("sigma does not map g_lambda to g_-lambda")
    ws = table.weights
    for w in ws[: min(len(ws), 6)]:
        for v in ws[: min(len(ws), 6)]:
            br = coords_bracket(pair.g, w.space[:, 0], v.space[:, 0])
            if np.linalg.norm(br) < 1e-9:
                continue
            target = _find(table, w.value + v.value)
            if target is None:
                raise IllConditioned("bracket grading violated")
            resid = br - target.space @ (target.space.conj().T @ br)
            if np.linalg.norm(resid) > 1e-7 * max(1.0, np.linalg.norm(br)):
                raise IllConditioned("bracket grading violated")


@dataclass
class SliceDecomposition:
    bracket_part: RealSubspace  # [h, eta0]
    cartan_part: RealSubspace  # c
    weight_part: RealSubspace  # q ∩ sum of g_lambda with lambda(eta0) = 0, lambda != 0
    vanishing: list  # weights vanishing at eta0

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bracket_part.dim, self.cartan_part.dim, self.weight_part.dim


def real_points(g: RealSubspace, Q: np.ndarray) -> RealSubspace:
    """Real points of a conjugation-stable complex subspace given in g-coordinates."""
    R = nk.realify(Q) if Q.shape[1] else np.zeros((g.dim, 0))
    return RealSubspace.from_columns(g.vecs @ R, g.N)


def eta_coords(cd: CartanSubspaceData, eta: np.ndarray) -> np.ndarray:
    return np.array([nk.inner(eta, b) for b in cd.ordered_basis])


def slice_at_semisimple(pair: SymmetricPairData, cd: CartanSubspaceData, table: WeightTable,
                        eta0: np.ndarray) -> SliceDecomposition:
    coords = eta_coords(cd, eta0)
    scale = max(1.0, float(np.linalg.norm(coords)))
    vanishing = [w for w in table.nonzero()
                 if abs(table.evaluate(w, coords)) < nk.TOL.eps_weight * scale]
    br = RealSubspace.span([bracket(H, eta0) for H in pair.h.basis], pair.N) if pair.h.dim \
        else RealSubspace.zero(pair.N)
    if vanishing:
        W = real_points(pair.g, np.hstack([w.space for w in vanishing]))
        third = nk.intersect(W, pair.q)
    else:
        third = RealSubspace.zero(pair.N)
    return SliceDecomposition(br, cd.c, third, vanishing)


# ---------------------------------------------------------------------------
# non-closed orbits

@dataclass
class NonClosedWitness:
    eta0: np.ndarray
    nilpart: np.ndarray
    commutator: float
    nil_certified: bool


def nonclosed_witness(pair: SymmetricPairData, xi: np.ndarray) -> NonClosedWitness:
    """xi = eta0 + nilpart with Ad(H)eta0 the closed orbit in the closure of Ad(H)xi.

    nilpart is certified to lie in the null cone of the centralizer pair of
    eta0: it lies in q, commutes with eta0 and is a nilpotent matrix. The
    centralizer of eta0 need not be theta-stable, so no sub-pair is built.
    """
    xs, xn = jordan_chevalley(pair, xi)
    scale = frob(xi) + 1.0
    if frob(xn) < nk.TOL.eps_nilzero * scale:
        raise AlreadyClosed("element is semisimple")
    comm = frob(bracket(xs, xn))
    nrm = frob(xn)
    power = np.linalg.matrix_power(xn / nrm, pair.N)
    ok = (pair.q.residual(xn) < 1e-7 * scale and comm < 1e-7 * scale ** 2
          and frob(power) < 1e-7)
    return NonClosedWitness(xs, xn, comm, ok)


# ---------------------------------------------------------------------------
# sampling

def random_nilpotent(pair: SymmetricPairData, rng: np.random.Generator) -> np.ndarray | None:
    """Random nilpotent element of q, or None if q has none visible this way.

    For Hermitian H in h ∩ p, ad(H) is self-adjoint on q with real
    eigenvalues, and every element of the sum of its positive eigenspaces is
    nilpotent (it raises the H-grading of C^N).
    """
    if pair.hp.dim == 0 or pair.q.dim == 0:
        return None
    H = pair.hp.random_element(rng)
    M = pair.q.operator_matrix(lambda X: bracket(H, X))
    M = (M + M.T) / 2
    w, V = np.linalg.eigh(M)
    pos = V[:, w > 1e-6 * max(1.0, np.max(np.abs(w)))]
    if pos.shape[1] == 0:
        return None
    xi = pair.q.from_coords(pos @ rng.standard_normal(pos.shape[1]))
    return xi / frob(xi)


def random_conjugate(pair: SymmetricPairData, xi: np.ndarray, rng: np.random.Generator,
                     scale: float = 1.0) -> np.ndarray:
    """Ad(h)xi for h = exp(Y), Y random in h with |Y| <= scale."""
    if pair.h.dim == 0:
        return xi
    Y = pair.h.random_element(rng)
    Y *= scale * rng.uniform() / max(frob(Y), 1e-300)
    g = nk.matexp(Y)
    return g @ xi @ np.linalg.inv(g)
