"""Per-point orbit classification for the (G1 × G2)-action x ↦ g1·x·g2^-1."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import numkernel as nk
from .cartanset import (StandardCartanSubset, class_of, classify_cartan_sets, fundamental_cartan,
                        normalize_to_cartan)
from .errors import IllConditioned, Inconclusive, InternalInconsistency, NotReduced
from .gradmap import isotropy_and_slice, phi, tau_x_matrix
from .liegroup import GroupPoint, Scenario, cartan_factor, matrix_to_json, random_point
from .numkernel import RealSubspace, bracket, frob, matexp
from .symmpair import (in_null_cone, is_closed_by_flow, is_closed_orbit, jordan_chevalley,
                       slice_pair)


@dataclass(frozen=True)
class ClassifyParams:
    flow_tol: float = 1e-9       # |Phi| at which the locator stops
    locate_rounds: int = 8
    locate_nfev: int = 200
    locate_cond: float = 1e4    # bound on cond(left)·cond(right) of the located point
    snap_tol: float = 1e-5       # wall snapping in c-coordinates
    snap_scale: float = 10.0     # snapping widens to snap_scale·sqrt(|Phi|) off the zero fiber
    slice_tol: float = 1e-18     # squared residual of the slice-coordinate solve
    trivial_slice: float = 1e-10  # slice coordinates below this are the base point itself
    factor_tol: float = 1e-6
    nil_tol: float = 1e-5        # power traces of the unit slice coordinate counted as zero
    seed: int = 0


@dataclass
class OrbitReport:
    point: GroupPoint
    closed: bool
    orbit_dim: int
    regular: bool
    strongly_regular: bool
    isotropy_dim: int
    isotropy_compact: bool
    proper_point: bool
    cartan_class: int | None = None
    closed_base: GroupPoint | None = None
    nil_witness: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"point": matrix_to_json(self.point.value), "closed": self.closed,
               "orbit_dim": self.orbit_dim, "regular": self.regular,
               "strongly_regular": self.strongly_regular, "isotropy_dim": self.isotropy_dim,
               "isotropy_compact": self.isotropy_compact, "proper_point": self.proper_point,
               "cartan_class": self.cartan_class,
               "closed_base": None if self.closed_base is None else matrix_to_json(self.closed_base.value),
               "nil_witness": None if self.nil_witness is None else matrix_to_json(self.nil_witness),
               "diagnostics": self.diagnostics}
        return out


# ---------------------------------------------------------------------------
# dimensions

def orbit_and_isotropy_dims(s: Scenario, x: GroupPoint) -> tuple[int, int]:
    sd = isotropy_and_slice(s, x, with_tau=False)
    orbit, iso = sd.tangent.dim, sd.hx.dim
    if orbit + iso != s.gs(1, 1).dim + s.gs(2, 1).dim:
        raise InternalInconsistency(f"orbit dim {orbit} + isotropy dim {iso} != dim g1 + dim g2")
    return orbit, iso


def max_orbit_dim(s: Scenario, samples: int = 100, seed: int = 0) -> int:
    """Largest orbit dimension over random points, cross-checked with dim g - dim c0."""
    def build():
        rng = np.random.default_rng(seed)
        best = max(orbit_and_isotropy_dims(s, random_point(s, rng))[0] for _ in range(samples))
        expected = s.g.dim - fundamental_cartan(s).c0.dim
        if best != expected:
            raise InternalInconsistency(
                f"sampled maximal orbit dim {best} != dim g - dim c0 = {expected}")
        return best
    return s.cached(("max_orbit_dim", samples, seed), build)


def isotropy_is_compact(s: Scenario, x: GroupPoint) -> bool:
    """h^x ∩ p = 0 at a zero-fiber point, where h^x is θ-stable."""
    hx = isotropy_and_slice(s, x, with_tau=False).hx
    return hx.dim == 0 or nk.intersect(hx, s.p).dim == 0


def _is_elliptic(sub: RealSubspace, rng: np.random.Generator, trials: int = 3) -> bool:
    """Every sampled element is diagonalizable with imaginary spectrum."""
    for _ in range(trials):
        X = sub.random_element(rng)
        w = np.linalg.eigvals(X)
        if np.max(np.abs(w.real)) > 1e-8 * max(1.0, frob(X)):
            return False
        _, N = nk.jordan_decomposition(X, nk.TOL.eps_jordan)
        if frob(N) > 1e-7 * max(1.0, frob(X)):
            return False
    return True


# ---------------------------------------------------------------------------
# closed base points and slice coordinates

def zero_fiber_projection(s: Scenario, y: GroupPoint) -> GroupPoint:
    """k·exp(P xi) with P the projection onto p^{-σ2} ∩ Ad(k^-1)p^{-σ1}.

    y is only near the zero fiber, so the intersection uses a rank tolerance
    scaled by |Phi(y)| / |xi|; a fixed eps_rank drops the shared direction.
    """
    ki = y.k.conj().T
    rel = phi(s, y).norm / max(frob(y.xi), 1e-300)
    tol = min(1e-2, max(nk.TOL.eps_rank, 10.0 * rel))
    target = nk.intersect(s.ps(2, -1), s.ps(1, -1).image(lambda X: ki @ X @ y.k), tol=tol)
    return GroupPoint.from_factors(y.k, target.project(y.xi))


def c_roots(s: Scenario, C: StandardCartanSubset) -> list[tuple[np.ndarray, complex]]:
    """(α, a): ad(ζ) acts by α(ζ) (complex, c-coordinates) and τ_n by a on a joint eigenspace."""
    def build():
        basis = C.t.basis + C.a.basis
        n = C.n
        ops = [s.g.operator_matrix(lambda X, b=b: bracket(b, X)) for b in basis]
        ops.append(tau_x_matrix(s, GroupPoint(n, n, np.zeros_like(n))))
        out = []
        for vals, _ in nk.simultaneous_eigensplit(ops, radius=1e-6):
            alpha = np.array(vals[:-1])
            if np.linalg.norm(alpha) > 1e-9:
                out.append((alpha, vals[-1] / abs(vals[-1])))
        return out
    key = ("c_roots", C.n.tobytes(), np.asarray(C.t.basis + C.a.basis).tobytes())
    return s.cached(key, build)


def snap_c_coords(roots, z: np.ndarray, tol: float) -> np.ndarray:
    """Move z onto the nearby walls a·e^{2α(z)} = 1 (Re α(z) = 0 and a phase condition)."""
    rows, rhs = [], []
    for alpha, a in roots:
        re, im = alpha.real, alpha.imag
        ph = 2 * (im @ z) + np.angle(a)
        m = np.round(ph / (2 * np.pi))
        near_re = np.linalg.norm(re) < 1e-9 or abs(re @ z) < tol
        near_ph = np.linalg.norm(im) < 1e-9 and abs(ph - 2 * np.pi * m) < 1e-9 \
            or np.linalg.norm(im) >= 1e-9 and abs(ph - 2 * np.pi * m) < tol
        if not (near_re and near_ph):
            continue
        if np.linalg.norm(re) >= 1e-9:
            rows.append(re)
            rhs.append(-(re @ z))
        if np.linalg.norm(im) >= 1e-9:
            rows.append(2 * im)
            rhs.append(2 * np.pi * m - ph)
    if not rows:
        return z
    return z + np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]


def power_traces(zeta: np.ndarray) -> np.ndarray:
    """|tr(u^k)|, k = 1..N, for the trace-free part u of zeta/|zeta|; all vanish iff u is nilpotent."""
    n = zeta.shape[0]
    u = zeta / frob(zeta)
    u = u - np.trace(u) / n * np.eye(n)
    out, pw = [], np.eye(n, dtype=complex)
    for _ in range(n):
        pw = pw @ u
        out.append(abs(np.trace(pw)))
    return np.array(out)


def _c_element(C: StandardCartanSubset, z: np.ndarray) -> np.ndarray:
    dt = C.t.dim
    return C.t.from_coords(z[:dt]) + C.a.from_coords(z[dt:])


def slice_coordinates(s: Scenario, x0: GroupPoint, y: np.ndarray, qx: RealSubspace):
    """(g1, g2, zeta) with y = g1·x0·exp(zeta)·g2^-1, g_j ∈ G_j, zeta ∈ q^{x0}; LM from 0."""
    G1, G2 = s.gs(1, 1), s.gs(2, 1)
    d1, d2 = G1.dim, G2.dim

    def unpack(v):
        return G1.from_coords(v[:d1]), G2.from_coords(v[d1:d1 + d2]), qx.from_coords(v[d1 + d2:])

    def res(v):
        X1, X2, Z = unpack(v)
        D = matexp(X1) @ x0.value @ matexp(Z) @ matexp(-X2) - y
        return np.concatenate([D.real.ravel(), D.imag.ravel()])

    n = d1 + d2 + qx.dim
    # the problem is underdetermined when dim g1 + dim g2 + dim q^x exceeds 2N^2; LM needs
    # at least as many residuals as unknowns
    method = "lm" if n <= 2 * s.N ** 2 else "trf"
    sol = least_squares(res, np.zeros(n), method=method, xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=2000)
    X1, X2, Z = unpack(sol.x)
    return matexp(X1), matexp(X2), Z, float(np.sum(sol.fun ** 2))


@dataclass
class Located:
    y: GroupPoint
    left: np.ndarray
    right: np.ndarray
    norm: float
    rounds: int
    evaluations: int


def locate_zero_fiber(s: Scenario, x: GroupPoint, tol: float = 1e-9, rounds: int = 8,
                      nfev: int = 200, max_cond: float = 1e4) -> Located:
    """A point y = left·x·right of the orbit with |Phi(y)| small.

    Levenberg-Marquardt on the components of Phi over the chart
    (V1, V2) ↦ exp(-V1)·y·exp(V2), V_j ∈ p^{σ_j}, the directions of the
    gradient flow; the chart is recentred after every round.  On orbits that
    are not closed |Phi| still decreases towards the closed orbit in the
    closure, so stopping at tol does not certify closedness.  There the
    factors left/right grow without bound and y drifts off the orbit by about
    eps·cond; steps are halved so that cond(left)·cond(right) stays below max_cond.
    """
    P1, P2 = s.ps(1, 1), s.ps(2, 1)
    d1, d2 = P1.dim, P2.dim
    left = np.eye(s.N, dtype=complex)
    right = np.eye(s.N, dtype=complex)
    y = x
    val = phi(s, y)
    evals = 0
    r = 0
    for r in range(rounds):
        if val.norm < tol:
            break

        def move(v, base=y):
            L = nk.hermitian_exp(-P1.from_coords(v[:d1]))
            R = nk.hermitian_exp(P2.from_coords(v[d1:]))
            return L, R, cartan_factor(s, L @ base.value @ R)

        def res(v):
            g = phi(s, move(v)[2])
            return np.r_[P1.coords(g.beta1), P2.coords(g.beta2)]

        method = "lm" if d1 + d2 > 0 else "trf"
        sol = least_squares(res, np.zeros(d1 + d2), method=method, xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=nfev)
        evals += sol.nfev
        v = sol.x
        for _ in range(40):
            L, R, cand = move(v)
            if np.linalg.cond(L @ left) * np.linalg.cond(right @ R) <= max_cond:
                break
            v = v / 2
        else:
            break
        cval = phi(s, cand)
        if cval.norm >= val.norm:
            break
        left, right, y, val = L @ left, right @ R, cand, cval
    return Located(y, left, right, val.norm, r, evals)


def _snapped_base(s, y, params, table):
    """Zero-fiber point x0 ∈ C on the walls near y, with y ≈ k1^-1·x0'·k2."""
    f = fundamental_cartan(s)
    tol = max(params.snap_tol, params.snap_scale * np.sqrt(phi(s, y).norm))
    nf = normalize_to_cartan(s, f, zero_fiber_projection(s, y), seed=params.seed,
                             check_fiber=False, snap_tol=tol)
    C = nf.C
    z = np.r_[C.t.coords(nf.eta), C.a.coords(nf.eta)]
    z = snap_c_coords(c_roots(s, C), z, tol)
    return nf, C, C.point(_c_element(C, z))


# ---------------------------------------------------------------------------
# classification

def classify(s: Scenario, x: GroupPoint, params: ClassifyParams = ClassifyParams(),
             table: list[StandardCartanSubset] | None = None) -> OrbitReport:
    """Closedness, regularity, isotropy and Cartan class of the orbit through x.

    The orbit is moved close to the zero fiber, a base point x0 on a standard
    Cartan subset is snapped onto nearby walls, and the point is written as
    g1·x0·exp(zeta)·g2^-1 with zeta in the slice q^{x0}.  The orbit is closed
    iff zeta is semisimple; this is decided by the Jordan route and by the
    Phi_H flow route, which must agree.
    """
    diag: dict = {"flow_tol": params.flow_tol, "locate_rounds": params.locate_rounds,
                  "locate_nfev": params.locate_nfev,
                  "locate_cond": params.locate_cond, "snap_tol": params.snap_tol,
                  "snap_scale": params.snap_scale, "slice_tol": params.slice_tol,
                  "trivial_slice": params.trivial_slice, "factor_tol": params.factor_tol,
                  "nil_tol": params.nil_tol,
                  "eps_jordan": nk.TOL.eps_jordan, "eps_nilzero": nk.TOL.eps_nilzero,
                  "eps_rank": nk.TOL.eps_rank, "seed": params.seed}
    orbit_dim, iso_dim = orbit_and_isotropy_dims(s, x)
    regular = orbit_dim == max_orbit_dim(s)
    loc = locate_zero_fiber(s, x, params.flow_tol, params.locate_rounds, params.locate_nfev,
                            params.locate_cond)
    diag["locate_rounds_used"] = loc.rounds
    diag["locate_evaluations"] = loc.evaluations
    diag["locate_final_norm"] = float(loc.norm)

    if table is None:
        table = classify_cartan_sets(s, params.seed)
    try:
        nf, C, x0 = _snapped_base(s, loc.y, params, table)
    except (NotReduced, InternalInconsistency) as exc:
        raise Inconclusive(f"no zero-fiber base point near the located point: {exc}", diag) from exc
    sd0 = isotropy_and_slice(s, x0, with_tau=False)
    y1 = nf.k1 @ loc.y.value @ np.linalg.inv(nf.k2)
    g1, g2, zeta, res = slice_coordinates(s, x0, y1, sd0.qx)
    size = frob(zeta)
    diag["slice_residual"] = res
    diag["slice_norm"] = float(size)
    if res > params.slice_tol:
        raise Inconclusive(f"slice coordinates not found (residual {res:.3e})", diag)
    pair = slice_pair(s, sd0)
    # the central part of zeta commutes with the rest and shifts the base along its stratum
    center = nk.centralizer(sd0.hx.basis + sd0.qx.basis, sd0.qx)
    zc = center.project(zeta)
    zr = zeta - zc
    size = frob(zr)
    diag["slice_central_norm"] = float(frob(zc))
    diag["slice_reduced_norm"] = float(size)
    nilpotent = False
    if size < params.trivial_slice * max(1.0, frob(zeta)):
        closed = True
    else:
        unit = zr / size
        traces = power_traces(zr)
        diag["slice_power_traces"] = float(traces.max())
        nilpotent = bool(traces.max() <= params.nil_tol)
        try:
            closed_jordan = False if nilpotent else is_closed_orbit(pair, unit)
        except IllConditioned as exc:
            raise Inconclusive(f"Jordan decomposition ill-conditioned: {exc}", diag) from exc
        closed_flow = is_closed_by_flow(pair, unit)
        diag["closed_by_jordan"] = bool(closed_jordan)
        diag["closed_by_flow"] = bool(closed_flow)
        if closed_jordan != closed_flow:
            raise Inconclusive("Jordan and Phi_H-flow verdicts disagree on the slice coordinate", diag)
        closed = closed_jordan

    rng = np.random.default_rng(params.seed)
    report = OrbitReport(x, closed, orbit_dim, regular, regular and closed, iso_dim,
                         False, False, diagnostics=diag)
    if closed:
        report.isotropy_compact = isotropy_is_compact(s, x0) if iso_dim == sd0.hx.dim \
            else _is_elliptic(isotropy_and_slice(s, x, with_tau=False).hx, rng)
        report.proper_point = report.isotropy_compact
        report.cartan_class = class_of(s, C, table)
        return report

    # x = L^-1·y·R^-1 and y = k1^-1·y1·k2 with y1 = g1·x0·exp(zeta_s)·exp(zeta_n)·g2^-1
    if nilpotent:
        zs, zn = zc, zr
    else:
        zs, zn = jordan_chevalley(pair, zr)
        zs = zs + zc
        if not in_null_cone(pair, zn):
            raise Inconclusive("nilpotent part of the slice coordinate is not in the null cone", diag)
    P = np.linalg.inv(loc.left) @ np.linalg.inv(nf.k1) @ g1
    Q = np.linalg.inv(g2) @ nf.k2 @ np.linalg.inv(loc.right)
    base = cartan_factor(s, P @ x0.value @ matexp(zs) @ Q)
    nil = np.linalg.inv(Q) @ zn @ Q
    err = frob(x.value - base.value @ matexp(nil)) / max(1.0, frob(x.value))
    diag["factorization_residual"] = float(err)
    if err > params.factor_tol:
        raise Inconclusive(f"factorization residual {err:.3e}", diag)
    report.closed_base = base
    report.nil_witness = nil
    report.isotropy_compact = _is_elliptic(isotropy_and_slice(s, x, with_tau=False).hx, rng)
    return report


def proper_region_probe(s: Scenario, xs: list[GroupPoint],
                        params: ClassifyParams = ClassifyParams()) -> list[bool]:
    table = classify_cartan_sets(s, params.seed)
    return [classify(s, x, params, table).proper_point for x in xs]
