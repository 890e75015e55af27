"""Dense complex-matrix numerics and real-subspace arithmetic.

All Lie algebras handled by the package are real subspaces of gl(N, C),
viewed as a real vector space of dimension 2N^2 with the inner product
<X, Y> = Re tr(X Y^H).  Complexified objects (weight spaces and the like)
are represented in coordinates over a real orthonormal basis, never as
matrices, because the complexification of a complex Lie algebra is not a
subspace of gl(N, C).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (AmbientMismatch, IllConditioned, NonCommuting, NotInvariant,
                     NotPositiveDefinite)


@dataclass(frozen=True)
class Tolerances:
    eps_rank: float = 1e-9
    eps_orth: float = 1e-10
    eps_herm: float = 1e-10
    eps_pd: float = 1e-12
    eps_comm: float = 1e-8
    eps_cluster: float = 1e-6
    eps_member: float = 1e-7
    eps_nilzero: float = 1e-9
    eps_weight: float = 1e-8
    # Jordan splitting of non-normal operators: defective eigenvalues spread
    # like eps**(1/m), so the clustering radius has to be much looser.
    eps_jordan: float = 1e-3


TOL = Tolerances()


def set_tolerances(**overrides: float) -> Tolerances:
    """Replace the module-wide defaults (used by the CLI ``--tol`` flag)."""
    global TOL
    unknown = set(overrides) - set(Tolerances.__dataclass_fields__)
    if unknown:
        raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
    TOL = replace(TOL, **{k: float(v) for k, v in overrides.items()})
    return TOL


# ---------------------------------------------------------------------------
# matrix functions

_PADE13 = np.array([
    64764752532480000., 32382376266240000., 7771770303897600.,
    1187353796428800., 129060195264000., 10559470521600.,
    670442572800., 33522128640., 1323241920., 40840800.,
    960960., 16380., 182., 1.])
_THETA13 = 5.371920351148152


def matexp(X: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 Pade core."""
    X = np.asarray(X, dtype=complex)
    n = X.shape[0]
    ident = np.eye(n, dtype=complex)
    norm1 = np.linalg.norm(X, 1)
    squarings = 0
    if norm1 > _THETA13:
        squarings = int(np.ceil(np.log2(norm1 / _THETA13)))
    A = X / 2.0 ** squarings
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        R = R @ R
    return R


def is_hermitian(P: np.ndarray, tol: float | None = None) -> bool:
    tol = TOL.eps_herm if tol is None else tol
    return np.linalg.norm(P - P.conj().T) <= tol * max(1.0, np.linalg.norm(P))


def hermitian_log(P: np.ndarray) -> np.ndarray:
    """Hermitian logarithm of a Hermitian positive definite matrix."""
    P = np.asarray(P, dtype=complex)
    if not is_hermitian(P):
        raise NotPositiveDefinite("input is not Hermitian")
    w, V = np.linalg.eigh((P + P.conj().T) / 2)
    if w.min() <= TOL.eps_pd:
        raise NotPositiveDefinite(f"smallest eigenvalue {w.min():.3e} <= eps_pd")
    return (V * np.log(w)) @ V.conj().T


def hermitian_exp(H: np.ndarray) -> np.ndarray:
    """exp of a Hermitian matrix through its spectral decomposition."""
    w, V = np.linalg.eigh((H + H.conj().T) / 2)
    return (V * np.exp(w)) @ V.conj().T


def frob(X: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(X) ** 2)))


def inner(X: np.ndarray, Y: np.ndarray) -> float:
    return float(np.real(np.vdot(Y, X)))


def bracket(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def dagger(X: np.ndarray) -> np.ndarray:
    return X.conj().T


# ---------------------------------------------------------------------------
# real coordinates on gl(N, C)

def vec(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def unvec(v: np.ndarray, N: int) -> np.ndarray:
    half = N * N
    return (v[:half] + 1j * v[half:]).reshape(N, N)


def _rank(svals: np.ndarray, tol: float) -> int:
    return int(np.sum(svals > tol))


@dataclass(frozen=True, eq=False)
class RealSubspace:
    """Real subspace of gl(N, C) with an orthonormal basis.

    ``vecs`` holds the basis as columns of a (2N^2, dim) real array.
    ``rank_gap`` records the (smallest kept, largest dropped) singular values
    of the rank decision that produced the subspace.
    """

    N: int
    vecs: np.ndarray
    rank_gap: tuple[float, float] = (np.inf, 0.0)

    @property
    def dim(self) -> int:
        return self.vecs.shape[1]

    @property
    def basis(self) -> list[np.ndarray]:
        return [unvec(self.vecs[:, j], self.N) for j in range(self.dim)]

    @classmethod
    def zero(cls, N: int) -> "RealSubspace":
        return cls(N, np.zeros((2 * N * N, 0)))

    @classmethod
    def span(cls, mats: Iterable[np.ndarray], N: int | None = None,
             tol: float | None = None) -> "RealSubspace":
        mats = list(mats)
        if N is None:
            if not mats:
                raise ValueError("N required for an empty span")
            N = mats[0].shape[0]
        if not mats:
            return cls.zero(N)
        M = np.stack([vec(m) for m in mats], axis=1)
        return cls.from_columns(M, N, tol)

    @classmethod
    def from_columns(cls, M: np.ndarray, N: int, tol: float | None = None,
                     relative: bool = False) -> "RealSubspace":
        tol = TOL.eps_rank if tol is None else tol
        if M.shape[1] == 0:
            return cls.zero(N)
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        cut = tol * (s[0] if relative and s.size and s[0] > 0 else 1.0)
        r = _rank(s, cut)
        gap = (float(s[r - 1]) if r else np.inf, float(s[r]) if r < s.size else 0.0)
        return cls(N, U[:, :r].copy(), gap)

    def coords(self, X: np.ndarray) -> np.ndarray:
        return self.vecs.T @ vec(X)

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return unvec(self.vecs @ np.asarray(c, dtype=float), self.N)

    def project(self, X: np.ndarray) -> np.ndarray:
        return self.from_coords(self.coords(X))

    def residual(self, X: np.ndarray) -> float:
        return frob(X - self.project(X))

    def contains(self, X: np.ndarray, tol: float | None = None) -> bool:
        tol = TOL.eps_rank if tol is None else tol
        return self.residual(X) <= tol * max(1.0, frob(X))

    def operator_matrix(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Matrix of a real-linear map in this subspace's coordinates.

        Only meaningful when ``f`` maps the subspace into itself.
        """
        cols = [self.coords(f(b)) for b in self.basis]
        if not cols:
            return np.zeros((0, 0))
        return np.stack(cols, axis=1)

    def image(self, f: Callable[[np.ndarray], np.ndarray], tol: float | None = None) -> "RealSubspace":
        return RealSubspace.span([f(b) for b in self.basis], self.N, tol)

    def gram_error(self) -> float:
        G = self.vecs.T @ self.vecs
        return float(np.max(np.abs(G - np.eye(self.dim)))) if self.dim else 0.0

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return self.from_coords(scale * rng.standard_normal(self.dim))

    def __repr__(self) -> str:
        return f"RealSubspace(N={self.N}, dim={self.dim})"


def _check_ambient(a: RealSubspace, b: RealSubspace) -> None:
    if a.N != b.N:
        raise AmbientMismatch(f"ambient gl({a.N}) vs gl({b.N})")


def intersect(a: RealSubspace, b: RealSubspace, tol: float | None = None) -> RealSubspace:
    """a ∩ b from the null space of [A, -B]; the same SVD decides dim(a + b)."""
    _check_ambient(a, b)
    tol = TOL.eps_rank if tol is None else tol
    if a.dim == 0 or b.dim == 0:
        return RealSubspace.zero(a.N)
    M = np.hstack([a.vecs, -b.vecs])
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = _rank(s, tol)
    null = Vt[r:].T
    if null.shape[1] == 0:
        return RealSubspace(a.N, np.zeros((a.vecs.shape[0], 0)),
                            (float(s[r - 1]), 0.0))
    V = a.vecs @ null[:a.dim] + b.vecs @ null[a.dim:]
    Q, _ = np.linalg.qr(V)
    return RealSubspace(a.N, Q, (float(s[r - 1]) if r else np.inf,
                                 float(s[r]) if r < s.size else 0.0))


def subspace_sum(a: RealSubspace, b: RealSubspace, tol: float | None = None) -> RealSubspace:
    _check_ambient(a, b)
    return RealSubspace.from_columns(np.hstack([a.vecs, b.vecs]), a.N, tol)


def orthocomplement(a: RealSubspace, within: RealSubspace, tol: float | None = None) -> RealSubspace:
    """Vectors of ``within`` orthogonal to ``a``."""
    _check_ambient(a, within)
    tol = TOL.eps_rank if tol is None else tol
    if within.dim == 0:
        return RealSubspace.zero(a.N)
    if a.dim == 0:
        return within
    C = a.vecs.T @ within.vecs
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    r = _rank(s, tol)
    V = within.vecs @ Vt[r:].T
    return RealSubspace(a.N, V)


def subspace_ops(a: RealSubspace, b: RealSubspace | np.ndarray, op: str):
    """Dispatcher over intersect / sum / orthocomplement-in / project-onto.

    ``orthocomplement-in`` returns the complement of ``a`` inside ``b``;
    ``project-onto`` projects the matrix ``b`` onto ``a``.
    """
    if op == "intersect":
        return intersect(a, b)
    if op == "sum":
        return subspace_sum(a, b)
    if op == "orthocomplement-in":
        return orthocomplement(a, b)
    if op == "project-onto":
        return a.project(np.asarray(b))
    raise ValueError(f"unknown op {op!r}")


def subspace_distance(a: RealSubspace, b: RealSubspace) -> float:
    """Spectral norm of the difference of orthogonal projectors (1.0 on dim mismatch)."""
    _check_ambient(a, b)
    if a.dim != b.dim:
        return 1.0
    if a.dim == 0:
        return 0.0
    P = a.vecs @ a.vecs.T - b.vecs @ b.vecs.T
    return float(np.linalg.norm(P, 2))


def centralizer(S: Sequence[np.ndarray], within: RealSubspace, tol: float | None = None) -> RealSubspace:
    """{Y in within : [Y, s] = 0 for all s in S}."""
    tol = TOL.eps_rank if tol is None else tol
    S = [s for s in S if frob(s) > 0]
    if not S or within.dim == 0:
        return within
    blocks = []
    for s in S:
        blocks.append(np.stack([vec(bracket(b, s)) / max(1.0, frob(s)) for b in within.basis], axis=1))
    M = np.vstack(blocks)
    _, sv, Vt = np.linalg.svd(M, full_matrices=True)
    r = _rank(sv, tol)
    return RealSubspace(within.N, within.vecs @ Vt[r:].T)


# ---------------------------------------------------------------------------
# spectral machinery on coordinate matrices

def cluster_values(vals: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-linkage clustering of complex numbers.

    Returns (labels, centers); centers are cluster means sorted
    lexicographically by (real, imag).
    """
    vals = np.asarray(vals, dtype=complex)
    n = vals.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) <= radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    roots = sorted({find(i) for i in range(n)})
    centers = np.array([vals[[k for k in range(n) if find(k) == r]].mean() for r in roots])
    order = np.lexsort((np.round(centers.imag, 9), np.round(centers.real, 9)))
    centers = centers[order]
    root_to_label = {roots[o]: lab for lab, o in enumerate(order)}
    labels = np.array([root_to_label[find(i)] for i in range(n)], dtype=int)
    return labels, centers


def cluster_separation(centers: np.ndarray) -> float:
    if len(centers) < 2:
        return np.inf
    d = np.abs(centers[:, None] - centers[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def invariant_subspaces(M: np.ndarray, radius: float) -> list[tuple[complex, np.ndarray]]:
    """Generalized eigenspaces of M, one per eigenvalue cluster.

    Each space is returned with an orthonormal complex basis obtained from a
    reordered Schur decomposition, which is stable even for defective M.
    """
    M = np.asarray(M, dtype=complex)
    d = M.shape[0]
    if d == 0:
        return []
    vals = np.linalg.eigvals(M)
    labels, centers = cluster_values(vals, radius)
    if len(centers) == 1:
        return [(complex(centers[0]), np.eye(d, dtype=complex))]
    out = []
    for c_idx, c in enumerate(centers):
        size = int(np.sum(labels == c_idx))

        def select(z, c_idx=c_idx):
            return int(np.argmin(np.abs(centers - z))) == c_idx

        _, Z, sdim = sla.schur(M, output="complex", sort=select)
        if sdim != size:
            raise IllConditioned(f"cluster at {c:.6g}: Schur selected {sdim}, expected {size}")
        out.append((complex(c), Z[:, :sdim]))
    return out


def simultaneous_eigensplit(ops: Sequence, domain: RealSubspace | None = None,
                            radius: float | None = None,
                            comm_tol: float | None = None) -> list[tuple[tuple[complex, ...], np.ndarray]]:
    """Joint eigenspaces of commuting operators.

    ``ops`` are coordinate matrices, or callables on matrices when ``domain``
    is given.  Returns (eigenvalue tuple, orthonormal complex basis in domain
    coordinates) pairs covering the complexified domain, sorted
    lexicographically by eigenvalue tuple.
    """
    if domain is not None:
        mats = []
        for f in ops:
            if callable(f):
                for b in domain.basis:
                    if not domain.contains(f(b)):
                        raise NotInvariant("operator does not preserve the domain")
                mats.append(domain.operator_matrix(f))
            else:
                mats.append(f)
        ops = mats
    radius = TOL.eps_cluster if radius is None else radius
    comm_tol = TOL.eps_comm if comm_tol is None else comm_tol
    ops = [np.asarray(M, dtype=complex) for M in ops]
    if not ops:
        raise ValueError("need at least one operator")
    d = ops[0].shape[0]
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = np.linalg.norm(ops[i] @ ops[j] - ops[j] @ ops[i])
            if c > comm_tol * max(1.0, np.linalg.norm(ops[i]) * np.linalg.norm(ops[j])):
                raise NonCommuting(f"operators {i},{j} commutator norm {c:.3e}")
    spaces: list[tuple[tuple[complex, ...], np.ndarray]] = [((), np.eye(d, dtype=complex))]
    for M in ops:
        refined = []
        for vals, Q in spaces:
            R = Q.conj().T @ M @ Q
            for c, V in invariant_subspaces(R, radius):
                refined.append((vals + (c,), Q @ V))
        spaces = refined

    def key(item):
        return tuple(x for z in item[0] for x in (round(z.real, 9), round(z.imag, 9)))

    spaces.sort(key=key)
    return spaces


def jordan_decomposition(M: np.ndarray, radius: float | None = None,
                         return_centers: bool = False):
    """Additive Jordan-Chevalley split M = S + Nil of a square matrix.

    S is built from spectral projectors onto the generalized eigenspaces
    (eigenvalues clustered at ``radius``).  Real input gives real output.
    """
    radius = TOL.eps_jordan if radius is None else radius
    M = np.asarray(M)
    real_input = not np.iscomplexobj(M) or np.allclose(np.imag(M), 0.0)
    spaces = invariant_subspaces(M, radius * max(1.0, np.linalg.norm(M, 2)))
    if len(spaces) == 1:
        c, _ = spaces[0]
        # use the exact mean eigenvalue (trace / n) for a single cluster
        c = np.trace(M) / M.shape[0]
        S = c * np.eye(M.shape[0])
    else:
        W = np.hstack([V for _, V in spaces])
        Winv = np.linalg.inv(W)
        S = np.zeros(M.shape, dtype=complex)
        col = 0
        for c, V in spaces:
            m = V.shape[1]
            P = V @ Winv[col:col + m]
            # trace of the restriction is the exact mean of the cluster
            lam = np.trace(V.conj().T @ M @ V) / m
            S += lam * P
            col += m
    if real_input:
        S = S.real
    if return_centers:
        return S, M - S, np.array([c for c, _ in spaces])
    return S, M - S


def realify(Q: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Real orthonormal basis of the real points of a conjugation-stable complex subspace."""
    if Q.shape[1] == 0:
        return np.zeros((Q.shape[0], 0))
    M = np.hstack([Q.real, Q.imag])
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    m = Q.shape[1]
    if m < s.size and s[m] > tol * max(1.0, s[0]):
        raise IllConditioned("complex subspace is not stable under conjugation")
    return U[:, :m]


def orthonormalize(M: np.ndarray, tol: float | None = None) -> np.ndarray:
    tol = TOL.eps_rank if tol is None else tol
    if M.shape[1] == 0:
        return M
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, :_rank(s, tol)]
