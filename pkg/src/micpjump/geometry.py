"""Convex polytopes in two and three dimensions.

A :class:`ConvexPolytope` carries an inequality description ``A x <= b``, an
optional equality description ``Ae x = be`` for lower-dimensional sets, and an
optional vertex list.  Operations return new polytopes; nothing is mutated.

Row normals produced by this module are unit length, so a row residual
``a.x - b`` is a signed Euclidean distance to the facet plane.
"""
from __future__ import annotations

import dataclasses
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

DEFAULT_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid input to a polytope operation."""


class EmptyPolytopeError(GeometryError):
    pass


class UnboundedPolytopeError(GeometryError):
    pass


def _rows(a, dim):
    if a is None:
        return np.zeros((0, dim))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, dim)


def _vec(b):
    if b is None:
        return np.zeros(0)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclasses.dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """Convex polytope with dual representation.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    A, b : ndarray or None
        Inequality rows ``A @ x <= b``.  ``None`` when the H-rep has not been
        computed.
    Ae, be : ndarray
        Equality rows ``Ae @ x == be`` (empty for full-dimensional sets).
    V : ndarray or None
        Vertices, one per row.  ``None`` when not computed.
    tol : float
        Absolute tolerance used by predicates on this polytope.
    empty : bool
        True for the empty set; all arrays are then empty.
    """

    dim: int
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    Ae: np.ndarray = None
    be: np.ndarray = None
    V: np.ndarray | None = None
    tol: float = DEFAULT_TOL
    empty: bool = False

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise GeometryError("dimension must be positive")
        set_ = object.__setattr__
        if self.A is not None:
            set_(self, "A", _rows(self.A, d))
            set_(self, "b", _vec(self.b))
            if len(self.A) != len(self.b):
                raise GeometryError("A and b row counts differ")
        set_(self, "Ae", _rows(self.Ae, d))
        set_(self, "be", _vec(self.be))
        if len(self.Ae) != len(self.be):
            raise GeometryError("Ae and be row counts differ")
        if self.V is not None:
            set_(self, "V", _rows(self.V, d))
        for arr in (self.A, self.b, self.Ae, self.be, self.V):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise GeometryError("non-finite polytope data")
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_hrep(cls, A, b, Ae=None, be=None, tol=DEFAULT_TOL):
        A = np.asarray(A, dtype=float)
        dim = A.shape[1] if A.ndim == 2 else np.asarray(Ae).shape[-1]
        return cls(dim, A, b, Ae, be, tol=tol)

    @classmethod
    def empty_set(cls, dim, tol=DEFAULT_TOL):
        return cls(dim, np.zeros((0, dim)), np.zeros(0), V=np.zeros((0, dim)),
                   tol=tol, empty=True)

    @property
    def has_hrep(self):
        return self.A is not None

    @property
    def has_vrep(self):
        return self.V is not None

    @property
    def affine_dim(self):
        if self.empty:
            return -1
        if self.V is not None:
            if len(self.V) == 1:
                return 0
            return int(np.linalg.matrix_rank(self.V - self.V[0], tol=1e-9 * _scale(self.V)))
        return self.dim - int(np.linalg.matrix_rank(self.Ae)) if len(self.Ae) else self.dim

    def __repr__(self):
        nh = None if self.A is None else len(self.A)
        nv = None if self.V is None else len(self.V)
        return (f"ConvexPolytope(dim={self.dim}, hrep={nh}, eq={len(self.Ae)}, "
                f"vrep={nv}, empty={self.empty})")


def _scale(P):
    return max(1.0, float(np.abs(P).max())) if np.size(P) else 1.0


def _normalize(A, b):
    n = np.linalg.norm(A, axis=1)
    keep = n > 0
    return A[keep] / n[keep, None], b[keep] / n[keep]


# ---------------------------------------------------------------------------
# convex hulls


def _chain_2d(Y, tol):
    """Monotone chain; returns vertex indices in counter-clockwise order."""
    order = np.lexsort((Y[:, 1], Y[:, 0]))

    def cross(o, a, b):
        return (Y[a, 0] - Y[o, 0]) * (Y[b, 1] - Y[o, 1]) - (Y[a, 1] - Y[o, 1]) * (Y[b, 0] - Y[o, 0])

    def half(seq):
        out = []
        for i in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], i) <= tol:
                out.pop()
            out.append(i)
        return out

    lower = half(order)
    upper = half(order[::-1])
    return lower[:-1] + upper[:-1]


def _facets_2d(Y, idx):
    P = Y[idx]
    E = np.roll(P, -1, axis=0) - P
    N = np.column_stack([E[:, 1], -E[:, 0]])
    N /= np.linalg.norm(N, axis=1)[:, None]
    return N, np.einsum("ij,ij->i", N, P)


def _hull_3d(Y, tol):
    try:
        h = ConvexHull(Y)
    except QhullError as exc:  # pragma: no cover - guarded by the rank test
        raise GeometryError(f"qhull failed: {exc}") from exc
    normals, offsets = [], []
    for eq in h.equations:
        n, off = eq[:3], -eq[3]
        for k, (m, o) in enumerate(zip(normals, offsets)):
            if np.abs(m - n).max() < 1e-7 and abs(o - off) < tol:
                break
        else:
            normals.append(n)
            offsets.append(off)
    N = np.array(normals)
    c = np.array(offsets)
    verts = []
    for i in h.vertices:
        tight = np.abs(N @ Y[i] - c) <= tol
        if np.linalg.matrix_rank(N[tight], tol=1e-6) == 3:
            verts.append(int(i))
    return sorted(verts), N, c


def _hull_data(points, tol):
    """Vertices, facets and affine-hull equalities of a point cloud."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[None, :]
    if P.size == 0:
        raise GeometryError("hull of no points")
    if not np.all(np.isfinite(P)):
        raise GeometryError("non-finite coordinates")
    n, dim = P.shape
    scale = _scale(P)
    atol = tol * scale
    c = P.mean(axis=0)
    _, S, Vt = np.linalg.svd(P - c, full_matrices=n <= dim)
    rank = int(np.sum(S > atol))
    B = Vt[:rank]
    Nc = Vt[rank:]
    Ae, be = Nc, Nc @ c
    if rank == 0:
        p = P[0] if n == 1 else c
        eye = np.eye(dim)
        return p[None, :], np.zeros((0, dim)), np.zeros(0), eye, p.copy()
    Y = (P - c) @ B.T
    if rank == 1:
        lo, hi = int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))
        idx = [lo, hi]
        Ny = np.array([[-1.0], [1.0]])
        cy = np.array([-Y[lo, 0], Y[hi, 0]])
    elif rank == 2:
        idx = _chain_2d(Y, atol * scale)
        Ny, cy = _facets_2d(Y, idx)
    else:
        idx, Ny, cy = _hull_3d(Y, atol)
    A = Ny @ B
    b = cy + A @ c
    V = P[np.asarray(idx)]
    return V, A, b, Ae, be


def hull(points, dim=None, tol=DEFAULT_TOL):
    """Convex hull of a finite point set.

    Returns a polytope whose ``V`` holds the minimal vertex set.  Inputs that
    span a lower-dimensional affine set get the matching ``Ae``/``be`` rows.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(1, -1) if dim is None else P.reshape(-1, dim)
    if dim is not None and P.shape[1] != dim:
        raise GeometryError("point dimension mismatch")
    V, _, _, Ae, be = _hull_data(P, tol)
    return ConvexPolytope(P.shape[1], Ae=Ae, be=be, V=V, tol=tol)


def vrep_to_hrep(p: ConvexPolytope) -> ConvexPolytope:
    """Facet description of a vertex-described polytope."""
    if p.empty:
        return p
    if p.V is None or len(p.V) == 0:
        raise GeometryError("vrep required")
    V, A, b, Ae, be = _hull_data(p.V, p.tol)
    return ConvexPolytope(p.dim, A, b, Ae, be, V=V, tol=p.tol)


# ---------------------------------------------------------------------------
# linear programming helpers


def _lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(None, None)):
    kw = {}
    if A_ub is not None and len(A_ub):
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if A_eq is not None and len(A_eq):
        kw.update(A_eq=A_eq, b_eq=b_eq)
    return linprog(c, bounds=bounds, method="highs", **kw)


def _cheb(A, b, Ae=None, be=None):
    """Largest ball in {A x <= b, Ae x = be} measured inside the affine hull.

    Returns ``(status, center, radius)`` where status is ``'ok'``,
    ``'empty'`` or ``'unbounded'``.
    """
    dim = A.shape[1] if len(A) else (Ae.shape[1] if Ae is not None else 0)
    Ae = np.zeros((0, dim)) if Ae is None else Ae
    if len(Ae):
        Nn = null_space(Ae)
        norms = np.linalg.norm(A @ Nn, axis=1) if Nn.size else np.zeros(len(A))
    else:
        norms = np.linalg.norm(A, axis=1)
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]]) if len(A) else None
    A_eq = np.hstack([Ae, np.zeros((len(Ae), 1))]) if len(Ae) else None
    res = _lp(c, A_ub, b, A_eq, be, bounds=[(None, None)] * dim + [(None, 1e9)])
    if res.status == 2:
        return "empty", None, None
    if res.status == 3 or res.x[-1] > 1e8:
        return "unbounded", None, None
    if res.status != 0:  # pragma: no cover
        raise GeometryError(f"LP failure: {res.message}")
    return "ok", res.x[:-1], float(res.x[-1])


def chebyshev_center(p: ConvexPolytope):
    """Center and radius of the largest inscribed ball.

    For lower-dimensional sets the ball lives in the affine hull.
    """
    if p.empty:
        raise EmptyPolytopeError("empty polytope has no Chebyshev center")
    if p.A is None:
        p = vrep_to_hrep(p)
    status, x, r = _cheb(p.A, p.b, p.Ae, p.be)
    if status == "empty" or r < -p.tol:
        raise EmptyPolytopeError("polytope is empty")
    if status == "unbounded":
        raise UnboundedPolytopeError("polytope is unbounded")
    return x, max(r, 0.0)


def contains(p: ConvexPolytope, x, tol=None) -> bool:
    """Membership test with row residuals measured as facet distances."""
    tol = p.tol if tol is None else tol
    if p.empty:
        return False
    if p.A is None:
        p = vrep_to_hrep(p)
    x = np.asarray(x, dtype=float)
    if len(p.A):
        n = np.linalg.norm(p.A, axis=1)
        n[n == 0] = 1.0
        if np.any((p.A @ x - p.b) / n > tol):
            return False
    if len(p.Ae):
        n = np.linalg.norm(p.Ae, axis=1)
        if np.any(np.abs(p.Ae @ x - p.be) / n > tol):
            return False
    return True


# ---------------------------------------------------------------------------
# H-rep operations


def remove_redundant(p: ConvexPolytope) -> ConvexPolytope:
    """Drop inequality rows implied by the remaining rows.

    Rows are examined from last to first so that of two equivalent rows the
    earlier one survives.
    """
    if p.empty or p.A is None or len(p.A) == 0:
        return p
    A, b = _normalize(p.A, p.b)
    keep = np.ones(len(A), dtype=bool)
    for i in range(len(A) - 1, -1, -1):
        keep[i] = False
        others = np.flatnonzero(keep)
        res = _lp(-A[i], A[others], b[others], p.Ae, p.be)
        if res.status == 3:
            keep[i] = True
        elif res.status == 2:
            raise EmptyPolytopeError("polytope is empty")
        elif res.status == 0 and -res.fun > b[i] + p.tol:
            keep[i] = True
    return ConvexPolytope(p.dim, A[keep], b[keep], p.Ae, p.be, V=p.V, tol=p.tol)


def intersect(polys: Sequence[ConvexPolytope], tol=None) -> ConvexPolytope:
    """Intersection of H-described polytopes, redundant rows removed."""
    polys = list(polys)
    if not polys:
        raise GeometryError("nothing to intersect")
    dim = polys[0].dim
    if any(q.dim != dim for q in polys):
        raise GeometryError("dimension mismatch")
    tol = polys[0].tol if tol is None else tol
    if any(q.empty for q in polys):
        return ConvexPolytope.empty_set(dim, tol)
    polys = [q if q.A is not None else vrep_to_hrep(q) for q in polys]
    A = np.vstack([q.A for q in polys])
    b = np.concatenate([q.b for q in polys])
    Ae = np.vstack([q.Ae for q in polys])
    be = np.concatenate([q.be for q in polys])
    if len(Ae):
        Ae, be = _independent_equalities(Ae, be, tol)
        if Ae is None:
            return ConvexPolytope.empty_set(dim, tol)
    status, _, r = _cheb(A, b, Ae, be)
    if status == "empty" or (status == "ok" and r < -tol):
        return ConvexPolytope.empty_set(dim, tol)
    return remove_redundant(ConvexPolytope(dim, A, b, Ae, be, tol=tol))


def _independent_equalities(Ae, be, tol):
    """Row-reduce equalities; returns (None, None) if inconsistent."""
    M = np.hstack([Ae, be[:, None]])
    scale = _scale(M)
    U, S, Vt = np.linalg.svd(Ae)
    r = int(np.sum(S > 1e-10 * scale))
    x0, *_ = np.linalg.lstsq(Ae, be, rcond=None)
    if np.abs(Ae @ x0 - be).max() > tol * scale:
        return None, None
    basis = Vt[:r]
    return basis, basis @ x0


def hrep_to_vrep(p: ConvexPolytope) -> ConvexPolytope:
    """Enumerate the vertices of an H-described polytope.

    Implicit equalities (pairs of opposing rows) are detected and moved to the
    equality block so that flat sets enumerate correctly.
    """
    if p.empty:
        return p
    if p.A is None:
        raise GeometryError("hrep required")
    dim, tol = p.dim, p.tol
    A, b = p.A, p.b
    zero = np.linalg.norm(A, axis=1) == 0
    if np.any(b[zero] < -tol):
        return dataclasses.replace(p, empty=True, V=np.zeros((0, dim)))
    A, b = A[~zero], b[~zero]
    Ae, be = p.Ae, p.be
    if len(Ae):
        Ae, be = _independent_equalities(Ae, be, tol)
        if Ae is None:
            return dataclasses.replace(p, empty=True, V=np.zeros((0, dim)))
    V = _enumerate(A, b, Ae, be, dim, tol)
    if V is None:
        return dataclasses.replace(p, empty=True, V=np.zeros((0, dim)))
    return dataclasses.replace(p, V=V)


def _enumerate(A, b, Ae, be, dim, tol):
    if len(Ae):
        x0, *_ = np.linalg.lstsq(Ae, be, rcond=None)
        Nn = null_space(Ae)
    else:
        x0, Nn = np.zeros(dim), np.eye(dim)
    k = Nn.shape[1]
    if k == 0:
        ok = len(A) == 0 or np.all(A @ x0 - b <= tol * _scale(b))
        return x0[None, :] if ok else None
    Ar = A @ Nn
    br = b - A @ x0
    nr = np.linalg.norm(Ar, axis=1)
    flat = nr <= 1e-12
    if np.any(br[flat] < -tol):
        return None
    Ar, br, nr = Ar[~flat], br[~flat], nr[~flat]
    # boundedness probe along every reduced axis
    for i in range(k):
        for s in (1.0, -1.0):
            c = np.zeros(k)
            c[i] = -s
            res = _lp(c, Ar, br, bounds=[(None, None)] * k)
            if res.status == 2:
                return None
            if res.status == 3:
                raise UnboundedPolytopeError("polytope is unbounded")
    status, yc, r = _cheb(Ar, br)
    if status == "empty" or r < -tol:
        return None
    scale = max(1.0, float(np.abs(br).max()) if len(br) else 1.0)
    if r <= tol * scale:
        # flat: promote implicit equalities and recurse
        An, bn = Ar / nr[:, None], br / nr
        implicit = []
        for i in range(len(An)):
            res = _lp(An[i], An, bn, bounds=[(None, None)] * k)
            if res.status == 0 and res.fun >= bn[i] - tol * scale:
                implicit.append(i)
        if not implicit:
            implicit = [int(np.argmin(bn - An @ yc))]
        Ae2 = np.vstack([Ae, (An[implicit] @ Nn.T)]) if len(Ae) else An[implicit] @ Nn.T
        be2 = np.concatenate([be, bn[implicit] + An[implicit] @ (Nn.T @ x0)]) if len(Ae) \
            else bn[implicit] + An[implicit] @ (Nn.T @ x0)
        Ae2, be2 = _independent_equalities(Ae2, be2, tol)
        if Ae2 is None:
            return None
        rest = [i for i in range(len(An)) if i not in implicit]
        A2 = An[rest] @ Nn.T
        b2 = bn[rest] + A2 @ x0
        return _enumerate(A2, b2, Ae2, be2, dim, tol)
    if k == 1:
        a = Ar[:, 0]
        hi = np.min(br[a > 0] / a[a > 0])
        lo = np.max(br[a < 0] / a[a < 0])
        Y = np.array([[lo], [hi]])
    else:
        hs = HalfspaceIntersection(np.hstack([Ar, -br[:, None]]), yc)
        Y = hs.intersections
        Y = Y[np.all(np.isfinite(Y), axis=1)]
        if k == 2:
            Y = Y[_chain_2d(Y, tol * _scale(Y) ** 2)]
        else:
            idx, _, _ = _hull_3d(Y, tol * _scale(Y))
            Y = Y[idx]
    X = x0 + Y @ Nn.T
    return _dedupe(X, tol * _scale(X))


def _dedupe(X, atol):
    out = []
    for x in X:
        if not any(np.abs(x - y).max() <= atol for y in out):
            out.append(x)
    return np.array(out)


def minkowski_sum(a: ConvexPolytope, b: ConvexPolytope) -> ConvexPolytope:
    """Minkowski sum of two vertex-described polytopes (with facets)."""
    if a.dim != b.dim:
        raise GeometryError("dimension mismatch")
    if a.empty or b.empty:
        return ConvexPolytope.empty_set(a.dim, a.tol)
    if a.V is None:
        a = hrep_to_vrep(a)
    if b.V is None:
        b = hrep_to_vrep(b)
    S = (a.V[:, None, :] + b.V[None, :, :]).reshape(-1, a.dim)
    tol = max(a.tol, b.tol)
    return vrep_to_hrep(ConvexPolytope(a.dim, V=S, tol=tol))


# ---------------------------------------------------------------------------
# text dump


def _fmt(v):
    return format(float(v), ".17g")


def dumps(p: ConvexPolytope) -> str:
    """Plain-text rows ``H a.. b``, ``E a.. b`` and ``V x..``."""
    lines = []
    if p.A is not None:
        for a, b in zip(p.A, p.b):
            lines.append("H " + " ".join(_fmt(v) for v in (*a, b)))
    for a, b in zip(p.Ae, p.be):
        lines.append("E " + " ".join(_fmt(v) for v in (*a, b)))
    if p.V is not None:
        for v in p.V:
            lines.append("V " + " ".join(_fmt(x) for x in v))
    return "\n".join(lines) + ("\n" if lines else "")


def loads(text: str | Iterable[str], dim: int, tol=DEFAULT_TOL) -> ConvexPolytope:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    H, E, V = [], [], []
    for ln in lines:
        parts = ln.split()
        if not parts:
            continue
        vals = [float(v) for v in parts[1:]]
        {"H": H, "E": E, "V": V}[parts[0]].append(vals)
    A = np.array([h[:-1] for h in H]).reshape(-1, dim) if H else np.zeros((0, dim))
    b = np.array([h[-1] for h in H])
    Ae = np.array([e[:-1] for e in E]).reshape(-1, dim) if E else np.zeros((0, dim))
    be = np.array([e[-1] for e in E])
    Vr = np.array(V).reshape(-1, dim) if V else None
    return ConvexPolytope(dim, A, b, Ae, be, V=Vr, tol=tol)
