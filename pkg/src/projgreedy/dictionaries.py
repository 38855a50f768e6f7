"""Dictionaries, the pure greedy selector and step, and their polar cones."""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .errors import (
    DimensionMismatch,
    IntersectionNotTrivial,
    InvalidDictionary,
    NumericalFailure,
    UnsupportedDictionary,
)
from .geometry import (
    CONE,
    HALFSPACE_CONE,
    SUBSPACE,
    UNIT_TOL,
    ConvexSet,
    Packed,
    as_vector,
    intersection_witness,
    is_member,
    pack,
    polar,
    sample_members,
)

FINITE = "finite"
CONE_SECTION = "cone_section"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A finite list of unit atoms, or a cone intersected with the unit sphere."""

    kind: str
    dim: int
    atoms: Optional[np.ndarray] = None
    cone: Optional[ConvexSet] = None
    label: str = ""
    _packed: tuple = field(default=None, repr=False)

    @classmethod
    def finite(cls, atoms, dim=None, label="", validate=True):
        a = np.array(atoms, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] == 0:
            raise InvalidDictionary("a finite dictionary needs a nonempty list of atoms")
        if dim is not None and a.shape[1] != dim:
            raise DimensionMismatch(f"atoms have dimension {a.shape[1]}, expected {dim}")
        if validate:
            if not np.all(np.isfinite(a)):
                raise InvalidDictionary("atoms must be finite")
            if np.any(np.abs(np.linalg.norm(a, axis=1) - 1.0) > UNIT_TOL):
                raise InvalidDictionary("atoms must have unit norm to 1e-12")
        a.setflags(write=False)
        obj = cls(FINITE, a.shape[1], atoms=a, label=label)
        packed = (K.FINITE, np.ascontiguousarray(a), a.shape[0], 0.0, np.zeros(a.shape[1]))
        object.__setattr__(obj, "_packed", packed)
        return obj

    @classmethod
    def cone_section(cls, cone: ConvexSet, label=""):
        if not cone.is_cone:
            raise InvalidDictionary(f"a cone section needs a cone kind, got {cone.kind}")
        if cone.kind == SUBSPACE and cone.rows.shape[0] == 0:
            raise InvalidDictionary("the cone of a cone section must not be {0}")
        if cone.kind == HALFSPACE_CONE and intersection_witness([cone]) is None:
            raise InvalidDictionary("the cone of a cone section must not be {0}")
        obj = cls(CONE_SECTION, cone.dim, cone=cone, label=label)
        object.__setattr__(obj, "_packed", cone._packed)
        return obj

    def generators(self) -> np.ndarray:
        """Atoms, or cone generators (subspaces contribute both signs)."""
        if self.kind == FINITE:
            return np.asarray(self.atoms)
        c = self.cone
        if c.kind == CONE:
            return c.rows / np.linalg.norm(c.rows, axis=1)[:, None]
        if c.kind == SUBSPACE:
            return np.vstack([c.rows, -c.rows])
        raise UnsupportedDictionary(
            "cone section given by half-space normals has no generator list; "
            "pass the polar of its cone through polar() first")

    @property
    def is_symmetric(self) -> bool:
        if self.kind == CONE_SECTION:
            return self.cone.kind == SUBSPACE
        a = self.atoms
        return all(np.min(np.linalg.norm(a + g, axis=1)) <= 1e-12 for g in a)

    def __repr__(self):
        tag = f" {self.label!r}" if self.label else ""
        size = self.atoms.shape[0] if self.kind == FINITE else self.cone.kind
        return f"Dictionary({self.kind}{tag}, dim={self.dim}, {size})"


@dataclass(frozen=True)
class GreedyChoice:
    atom: np.ndarray
    coefficient: float

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0.0


def pack_dictionaries(dicts: Sequence[Dictionary]) -> Packed:
    d = dicts[0].dim
    if any(D.dim != d for D in dicts):
        raise DimensionMismatch("all dictionaries must share one dimension")
    width = max(1, max(D._packed[2] for D in dicts))
    n = len(dicts)
    out = Packed(np.empty(n, dtype=np.int64), np.zeros((n, width, d)),
                 np.empty(n, dtype=np.int64), np.zeros(n), np.zeros((n, d)))
    for j, D in enumerate(dicts):
        code, rows, cnt, sc, vec = D._packed
        out.kinds[j] = code
        out.mats[j, :cnt] = rows
        out.counts[j] = cnt
        out.scals[j] = sc
        out.vecs[j] = vec
    return out


def select(D: Dictionary, x) -> GreedyChoice:
    """Best-correlated atom of ``D`` for ``x``; the zero choice if the sup is <= 0."""
    v = as_vector(x, D.dim)
    code, rows, cnt, sc, vec = D._packed
    atom = np.empty(D.dim)
    coef, status = K.select_packed(code, rows, cnt, sc, vec, v, atom)
    if status != K.OK:
        raise NumericalFailure(f"cone projection failed inside the selector of {D!r}")
    return GreedyChoice(atom, float(coef))


def greedy_step(D: Dictionary, x) -> np.ndarray:
    """``x - <x, g> g`` for the selected atom ``g``."""
    v = as_vector(x, D.dim)
    ch = select(D, v)
    return v - ch.coefficient * ch.atom


def polar_cone_of_dictionary(D: Dictionary) -> ConvexSet:
    """``{y : <y, g> <= 0 for all g in D}``."""
    label = f"A({D.label})" if D.label else ""
    if D.kind == FINITE:
        return ConvexSet.halfspace_cone(D.atoms, D.dim, label=label)
    return polar(D.cone)


def halfspace_free_check(dicts: Sequence[Dictionary]):
    """Whether the union of the dictionaries lies in no closed half-space.

    Returns ``(True, None)`` or ``(False, v)`` with a unit ``v`` satisfying
    ``<v, g> <= 0`` for every atom. The union is half-space free exactly when
    0 is interior to the convex hull of the atoms; the LP below looks for the
    most interior witness of the opposite, and if the best margin is zero it
    falls back to any nonzero vector of the polar cone.
    """
    d = dicts[0].dim
    if any(D.dim != d for D in dicts):
        raise DimensionMismatch("all dictionaries must share one dimension")
    g = np.vstack([D.generators() for D in dicts])
    # variables (v, s): maximise s subject to <g_i, v> + s <= 0, |v|_inf <= 1
    a_ub = np.hstack([g, np.ones((g.shape[0], 1))])
    obj = np.zeros(d + 1)
    obj[-1] = -1.0
    res = linprog(obj, A_ub=a_ub, b_ub=np.zeros(g.shape[0]),
                  bounds=[(-1, 1)] * d + [(0, 1)], method="highs")
    if res.status == 0 and -res.fun > 1e-9:
        v = res.x[:d]
        return False, v / np.linalg.norm(v)
    w = intersection_witness([ConvexSet.halfspace_cone(g, d)])
    if w is not None:
        return False, w
    return True, None


def union_is_halfspace_free(dicts: Sequence[Dictionary]):
    """Half-space freeness for any supported dictionaries.

    Falls back to the equivalent statement that the polar cones of the
    dictionaries intersect only in 0 when some cone section has no generator
    list (sections of half-space cones, as produced by the cone bridge).
    """
    try:
        return halfspace_free_check(dicts)
    except UnsupportedDictionary:
        w = intersection_witness([polar_cone_of_dictionary(D) for D in dicts])
        return w is None, w


def bridge_dictionaries(cone_pair, samples: int = 256, seed: int = 0):
    """Dictionaries ``(A_1* ∩ S, A_2* ∩ S)`` for a pair of cones meeting only at 0.

    A greedy step with the section of ``polar(A_i)`` equals the metric
    projection onto ``A_i``.
    """
    a1, a2 = cone_pair
    for c in (a1, a2):
        if not c.is_cone:
            raise UnsupportedDictionary(f"bridge needs cone kinds, got {c.kind}")
    if a1.dim != a2.dim:
        raise DimensionMismatch("cones of a bridge pair must share one dimension")
    rng = np.random.default_rng(seed)
    for src, other in ((a1, a2), (a2, a1)):
        for u in sample_members(src, samples, rng):
            n = np.linalg.norm(u)
            if n > 1e-12 and is_member(other, u / n, tol=1e-9):
                raise IntersectionNotTrivial(f"sampled direction {u / n} lies in both cones")
    w = intersection_witness([a1, a2])
    if w is not None:
        raise IntersectionNotTrivial(f"direction {w} lies in both cones")
    return (Dictionary.cone_section(polar(a1), label=f"{a1.label}*" if a1.label else ""),
            Dictionary.cone_section(polar(a2), label=f"{a2.label}*" if a2.label else ""))
