"""Convex set descriptions, metric projection, polar cones and Moreau.

A :class:`ConvexSet` is an immutable description of one of six projectable
kinds. Projections run through the packed kernels in :mod:`._kernels`.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .errors import (
    DimensionMismatch,
    InvalidSet,
    NumericalFailure,
    UnsupportedSet,
)

UNIT_TOL = 1e-12
MEMBER_REL = K.MEMBER_REL

SUBSPACE = "subspace"
AFFINE = "affine"
HALFSPACE = "halfspace"
BALL = "ball"
CONE = "cone"
HALFSPACE_CONE = "halfspace_cone"

KINDS = (SUBSPACE, AFFINE, HALFSPACE, BALL, CONE, HALFSPACE_CONE)
CONE_KINDS = (SUBSPACE, CONE, HALFSPACE_CONE)

_KIND_CODE = {
    SUBSPACE: K.SUBSPACE,
    AFFINE: K.AFFINE,
    HALFSPACE: K.HALFSPACE,
    BALL: K.BALL,
    CONE: K.GEN_CONE,
    HALFSPACE_CONE: K.HS_CONE,
}


def as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-D float vector, optionally of size ``dim``."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"vector has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def _rows(a, dim=None, name="rows") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1 and m.size == 0:
        if dim is None:
            raise InvalidSet(f"empty {name} needs an explicit dimension")
        m = m.reshape(0, dim)
    if m.ndim != 2:
        raise InvalidSet(f"{name} must be a 2-D array of row vectors")
    if dim is not None and m.shape[1] != dim:
        raise DimensionMismatch(f"{name} have dimension {m.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(m)):
        raise InvalidSet(f"{name} must be finite")
    return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConvexSet:
    """One closed convex set in R^d.

    Use the constructors (:meth:`subspace`, :meth:`cone`, ...) rather than the
    raw fields. ``rows`` holds the orthonormal basis (subspace, affine), the
    generators (cone) or the unit outward normals (halfspace_cone); ``vector``
    is the half-space normal, the ball centre or the affine offset.
    """

    kind: str
    dim: int
    rows: np.ndarray
    vector: np.ndarray
    scalar: float = 0.0
    label: str = ""
    _packed: tuple = field(default=None, repr=False, compare=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def _make(cls, kind, dim, rows=None, vector=None, scalar=0.0, label="", validate=True):
        rows = np.zeros((0, dim)) if rows is None else rows
        vector = np.zeros(dim) if vector is None else vector
        obj = cls(kind, int(dim), _frozen(rows), _frozen(vector), float(scalar), str(label))
        if validate:
            obj.validate()
        object.__setattr__(obj, "_packed", obj._pack_one())
        return obj

    @classmethod
    def subspace(cls, basis, dim=None, label="", validate=True):
        """Linear subspace from an orthonormal basis given as rows."""
        b = _rows(basis, dim, "basis")
        return cls._make(SUBSPACE, b.shape[1], rows=b, label=label, validate=validate)

    @classmethod
    def span(cls, vectors, dim=None, label="", rank_tol=1e-10):
        """Linear subspace spanned by arbitrary rows (orthonormalised here)."""
        v = _rows(vectors, dim, "vectors")
        if v.shape[0] == 0:
            return cls.subspace(v, v.shape[1], label=label)
        u, s, vt = np.linalg.svd(v, full_matrices=False)
        r = int(np.sum(s > rank_tol * max(1.0, s[0])))
        return cls.subspace(vt[:r], v.shape[1], label=label)

    @classmethod
    def affine(cls, basis, offset, label="", validate=True):
        off = as_vector(offset)
        b = _rows(basis, off.shape[0], "basis")
        return cls._make(AFFINE, off.shape[0], rows=b, vector=off, label=label, validate=validate)

    @classmethod
    def halfspace(cls, normal, offset=0.0, label="", validate=True):
        """``{y : <normal, y> <= offset}`` with a unit normal."""
        n = as_vector(normal)
        return cls._make(HALFSPACE, n.shape[0], vector=n, scalar=offset, label=label,
                         validate=validate)

    @classmethod
    def ball(cls, center, radius, label="", validate=True):
        c = as_vector(center)
        return cls._make(BALL, c.shape[0], vector=c, scalar=radius, label=label, validate=validate)

    @classmethod
    def cone(cls, generators, dim=None, label="", validate=True):
        """Nonnegative span of the given nonzero generator rows."""
        g = _rows(generators, dim, "generators")
        return cls._make(CONE, g.shape[1], rows=g, label=label, validate=validate)

    @classmethod
    def halfspace_cone(cls, normals, dim=None, label="", validate=True):
        """``{y : <n_i, y> <= 0 for all i}`` from unit outward normals."""
        n = _rows(normals, dim, "normals")
        return cls._make(HALFSPACE_CONE, n.shape[1], rows=n, label=label, validate=validate)

    # -- invariants -------------------------------------------------------

    def validate(self):
        if self.kind not in KINDS:
            raise InvalidSet(f"unknown set kind {self.kind!r}")
        if self.kind in (SUBSPACE, AFFINE):
            b = self.rows
            if b.shape[0] > self.dim:
                raise InvalidSet("basis has more vectors than the dimension")
            gram = b @ b.T
            if b.shape[0] and np.max(np.abs(gram - np.eye(b.shape[0]))) > UNIT_TOL:
                raise InvalidSet("subspace basis is not orthonormal to 1e-12")
        elif self.kind == HALFSPACE:
            if abs(np.linalg.norm(self.vector) - 1.0) > UNIT_TOL:
                raise InvalidSet("half-space normal must have unit norm")
        elif self.kind == BALL:
            if not np.isfinite(self.scalar) or self.scalar < 0:
                raise InvalidSet("ball radius must be finite and >= 0")
        elif self.kind == CONE:
            if self.rows.shape[0] == 0:
                raise InvalidSet("a generated cone needs at least one generator")
            if np.any(np.linalg.norm(self.rows, axis=1) == 0.0):
                raise InvalidSet("cone generators must be nonzero")
        elif self.kind == HALFSPACE_CONE:
            norms = np.linalg.norm(self.rows, axis=1)
            if np.any(np.abs(norms - 1.0) > UNIT_TOL):
                raise InvalidSet("half-space cone normals must have unit norm")
        if not np.isfinite(self.scalar):
            raise InvalidSet("scalar parameter must be finite")

    @property
    def is_cone(self) -> bool:
        return self.kind in CONE_KINDS

    def contains_origin(self) -> bool:
        return is_member(self, np.zeros(self.dim))

    # -- packing ----------------------------------------------------------

    def _pack_one(self):
        rows = self.rows
        if self.kind == CONE:
            # the kernel works with unit generators; the cone is unchanged
            rows = rows / np.linalg.norm(rows, axis=1)[:, None]
        return (_KIND_CODE[self.kind], np.ascontiguousarray(rows), rows.shape[0],
                float(self.scalar), np.ascontiguousarray(self.vector))

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        return f"ConvexSet({self.kind}{tag}, dim={self.dim}, rows={self.rows.shape[0]})"


class Packed(NamedTuple):
    kinds: np.ndarray
    mats: np.ndarray
    counts: np.ndarray
    scals: np.ndarray
    vecs: np.ndarray


def pack(sets: Sequence[ConvexSet]) -> Packed:
    """Stack set descriptions into the padded arrays the run kernels expect."""
    if not sets:
        raise ValueError("need at least one set")
    d = sets[0].dim
    for s in sets:
        if s.dim != d:
            raise DimensionMismatch("all sets must share one dimension")
    items = [s._packed for s in sets]
    width = max(1, max(it[2] for it in items))
    n = len(items)
    kinds = np.empty(n, dtype=np.int64)
    mats = np.zeros((n, width, d))
    counts = np.empty(n, dtype=np.int64)
    scals = np.empty(n)
    vecs = np.empty((n, d))
    for j, (code, rows, cnt, sc, vec) in enumerate(items):
        kinds[j] = code
        mats[j, :cnt] = rows
        counts[j] = cnt
        scals[j] = sc
        vecs[j] = vec
    return Packed(kinds, mats, counts, scals, vecs)


# -- operations -------------------------------------------------------------


def project(s: ConvexSet, x) -> np.ndarray:
    """Nearest point of ``s`` to ``x``."""
    v = as_vector(x)
    if v.shape[0] != s.dim:
        raise DimensionMismatch(f"point has dimension {v.shape[0]}, set has {s.dim}")
    code, rows, cnt, sc, vec = s._packed
    out = np.empty(s.dim)
    status = K.project_packed(code, rows, cnt, sc, vec, v, out)
    if status != K.OK:
        raise NumericalFailure(f"cone projection did not converge for {s!r}")
    return out


def project_batch(s: ConvexSet, xs) -> np.ndarray:
    """Project each row of ``xs`` onto ``s``."""
    pts = np.ascontiguousarray(np.asarray(xs, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != s.dim:
        raise DimensionMismatch(f"expected rows of dimension {s.dim}")
    code, rows, cnt, sc, vec = s._packed
    out = np.empty_like(pts)
    if K.project_many(code, rows, cnt, sc, vec, pts, out) != K.OK:
        raise NumericalFailure(f"cone projection did not converge for {s!r}")
    return out


def distance(s: ConvexSet, x) -> float:
    v = as_vector(x)
    return float(np.linalg.norm(v - project(s, v)))


def member_tol(x) -> float:
    return MEMBER_REL * max(1.0, float(np.linalg.norm(x)))


def is_member(s: ConvexSet, x, tol: Optional[float] = None) -> bool:
    """Membership up to ``tol`` (default: 1e-9 relative to ``max(1, |x|)``)."""
    v = as_vector(x)
    if tol is None:
        tol = member_tol(v)
    return distance(s, v) <= tol


def orthogonal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal rows spanning the complement of the row space of ``basis``."""
    if basis.shape[0] == 0:
        return np.eye(dim)
    _, s, vt = np.linalg.svd(basis, full_matrices=True)
    r = int(np.sum(s > 1e-10))
    return vt[r:]


def polar(cone: ConvexSet) -> ConvexSet:
    """Polar cone ``{y : <y, z> <= 0 for every z in cone}``."""
    label = f"{cone.label}*" if cone.label else ""
    if cone.kind == CONE:
        g = cone.rows / np.linalg.norm(cone.rows, axis=1)[:, None]
        return ConvexSet.halfspace_cone(g, cone.dim, label=label)
    if cone.kind == HALFSPACE_CONE:
        return ConvexSet.cone(cone.rows, cone.dim, label=label)
    if cone.kind == SUBSPACE:
        return ConvexSet.subspace(orthogonal_complement(cone.rows, cone.dim), cone.dim,
                                  label=label)
    raise UnsupportedSet(f"polar is defined here only for cone kinds, got {cone.kind}")


@dataclass(frozen=True)
class MoreauReport:
    decomposition_residual: float
    orthogonality_residual: float

    def ok(self, tol=1e-10) -> bool:
        return self.decomposition_residual <= tol and self.orthogonality_residual <= tol


def moreau_check(cone: ConvexSet, x) -> MoreauReport:
    """Residuals of ``x = P_A(x) + P_{A*}(x)`` with orthogonal parts."""
    if not cone.is_cone:
        raise UnsupportedSet(f"Moreau decomposition needs a cone, got {cone.kind}")
    v = as_vector(x, cone.dim)
    p = project(cone, v)
    q = project(polar(cone), v)
    return MoreauReport(float(np.linalg.norm(p + q - v)), float(abs(p @ q)))


# -- sampling and intersections ----------------------------------------------


def sample_members(s: ConvexSet, count: int, rng: np.random.Generator, scale=1.0) -> np.ndarray:
    """Members of ``s`` obtained by projecting Gaussian points."""
    pts = rng.standard_normal((count, s.dim)) * scale
    return project_batch(s, pts)


def _h_rows(s: ConvexSet):
    """Rows N with ``s = {y : N y <= 0}``, or None when no such form is at hand."""
    if s.kind == HALFSPACE_CONE:
        return s.rows
    if s.kind == SUBSPACE:
        comp = orthogonal_complement(s.rows, s.dim)
        return np.vstack([comp, -comp])
    if s.kind == HALFSPACE and s.scalar == 0.0:
        return s.vector[None, :]
    return None


def homogeneous_form(sets: Sequence[ConvexSet]) -> Optional[ConvexSet]:
    """The intersection as one halfspace cone when every set admits that form."""
    rows = []
    for s in sets:
        r = _h_rows(s)
        if r is None:
            return None
        rows.append(r)
    d = sets[0].dim
    stacked = np.vstack(rows) if rows else np.zeros((0, d))
    if stacked.shape[0] == 0:
        return ConvexSet.subspace(np.eye(d), d)
    return ConvexSet.halfspace_cone(stacked, d)


def _lp_blocks(sets: Sequence[ConvexSet], box: float):
    """Linear description of ``(∩ sets) ∩ [-box, box]^d`` over (y, lambdas)."""
    d = sets[0].dim
    n_lam = sum(s.rows.shape[0] for s in sets if s.kind == CONE)
    nv = d + n_lam
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    off = d
    for s in sets:
        if s.kind == BALL:
            raise UnsupportedSet("balls have no linear description")
        if s.kind == HALFSPACE_CONE:
            for n in s.rows:
                row = np.zeros(nv)
                row[:d] = n
                a_ub.append(row)
                b_ub.append(0.0)
        elif s.kind == HALFSPACE:
            row = np.zeros(nv)
            row[:d] = s.vector
            a_ub.append(row)
            b_ub.append(s.scalar)
        elif s.kind in (SUBSPACE, AFFINE):
            comp = orthogonal_complement(s.rows, d)
            rhs = comp @ s.vector if s.kind == AFFINE else np.zeros(comp.shape[0])
            for q, r in zip(comp, rhs):
                row = np.zeros(nv)
                row[:d] = q
                a_eq.append(row)
                b_eq.append(r)
        elif s.kind == CONE:
            m = s.rows.shape[0]
            g = s.rows / np.linalg.norm(s.rows, axis=1)[:, None]
            for k in range(d):
                row = np.zeros(nv)
                row[k] = 1.0
                row[off:off + m] = -g[:, k]
                a_eq.append(row)
                b_eq.append(0.0)
            off += m
    bounds = [(-box, box)] * d + [(0, None)] * n_lam
    as_arr = lambda rows: np.array(rows) if rows else None  # noqa: E731
    return nv, as_arr(a_ub), (np.array(b_ub) if b_ub else None), as_arr(a_eq), \
        (np.array(b_eq) if b_eq else None), bounds


def _lp_max(sets, c, box=1.0):
    d = sets[0].dim
    nv, a_ub, b_ub, a_eq, b_eq, bounds = _lp_blocks(sets, box)
    obj = np.zeros(nv)
    obj[:d] = -np.asarray(c)
    res = linprog(obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    return res.x[:d], -res.fun


def intersection_witness(sets: Sequence[ConvexSet], tol: float = 1e-9) -> Optional[np.ndarray]:
    """A unit vector in the intersection of the given cones, or None if it is {0}.

    Decided by 2d linear programs over the unit box.
    """
    d = sets[0].dim
    for k in range(d):
        for sign in (1.0, -1.0):
            c = np.zeros(d)
            c[k] = sign
            got = _lp_max(sets, c)
            if got is not None and got[1] > tol:
                y = got[0]
                return y / np.linalg.norm(y)
    return None


def sample_intersection(sets: Sequence[ConvexSet], count: int, rng: np.random.Generator,
                        tol: Optional[float] = None) -> np.ndarray:
    """Members of the intersection of ``sets``.

    Exact when the intersection has a single-cone form (one set, or all sets
    homogeneous half-space descriptions): Gaussian points are projected.
    Otherwise linear programs with random objectives give vertices of the
    box-truncated intersection, convex combinations fill in, and every sample
    is screened against each set at ``tol``.
    """
    d = sets[0].dim
    if len(sets) == 1:
        return sample_members(sets[0], count, rng)
    single = homogeneous_form(sets)
    if single is not None:
        return sample_members(single, count, rng)
    verts = []
    n_lp = max(4, min(count, 4 * d))
    try:
        for _ in range(n_lp):
            got = _lp_max(sets, rng.standard_normal(d))
            if got is not None:
                verts.append(got[0])
    except UnsupportedSet:
        pts = rng.standard_normal((count * 8, d))
        verts = [p for p in pts]
    cands = list(verts)
    if len(verts) >= 2:
        for _ in range(count):
            i, j = rng.integers(len(verts), size=2)
            t = rng.random()
            cands.append(t * verts[i] + (1 - t) * verts[j])
    if all(s.contains_origin() for s in sets):
        cands.append(np.zeros(d))
    keep = []
    for a in cands:
        ta = member_tol(a) if tol is None else tol
        if all(distance(s, a) <= ta for s in sets):
            keep.append(a)
        if len(keep) >= count:
            break
    return np.array(keep).reshape(-1, d)
