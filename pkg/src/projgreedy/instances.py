"""Certified instance generators, the standard suite and a brute-force oracle.

Every generator takes an explicit seed. Each instance carries a certificate
naming the construction that guarantees the standing hypothesis: the sets
meet only at 0 (projection mode) or the union of the dictionaries lies in no
half-space (greedy mode). The certificate is re-checked after generation by
a path independent of the construction.
"""

import itertools
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .dictionaries import Dictionary
from .errors import BudgetExceeded, RetryExhausted
from .geometry import CONE, ConvexSet, as_vector, orthogonal_complement

TRIVIAL_INTERSECTION = "TrivialIntersectionByConstruction"
SUBSPACES = "SubspacesWithKnownIntersection"
SYMMETRIC_DICTS = "SymmetricDictionaries"
SEPARATED_CONES = "SeparatedCones"
HALFSPACE_FREE = "HalfspaceFreeUnion"

CERTIFICATES = (TRIVIAL_INTERSECTION, SUBSPACES, SYMMETRIC_DICTS, SEPARATED_CONES,
                HALFSPACE_FREE)

MAX_DRAWS = 100
RANK_TOL = 1e-10


@dataclass
class InstanceSpec:
    dim: int
    mode: str
    certificate: str
    seed: int
    sets: Optional[List[ConvexSet]] = None
    dictionaries: Optional[List[Dictionary]] = None
    x0: Optional[np.ndarray] = None
    schedule: Optional[dict] = None
    id: str = ""
    info: dict = field(default_factory=dict)
    skip_validation: bool = False

    @property
    def K(self) -> int:
        return len(self.sets if self.mode == "projection" else self.dictionaries)

    @property
    def members(self):
        return self.sets if self.mode == "projection" else self.dictionaries


def _rng(seed):
    return np.random.default_rng(np.random.PCG64(int(seed)))


def _x0(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v) * rng.uniform(1.0, 5.0)


def _orthonormal(rng, d, k):
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return q[:, :k].T


# -- subspaces --------------------------------------------------------------


def complement_rank(sets: List[ConvexSet]) -> int:
    """Rank of the stacked complement bases (d means the intersection is {0})."""
    d = sets[0].dim
    stacked = np.vstack([orthogonal_complement(s.rows, d) for s in sets])
    if stacked.shape[0] == 0:
        return 0
    return int(np.linalg.matrix_rank(stacked, tol=RANK_TOL))


def subspace_conditioning(sets: List[ConvexSet]) -> float:
    """d-th singular value of the stacked complement bases (0 if rank deficient)."""
    d = sets[0].dim
    stacked = np.vstack([orthogonal_complement(s.rows, d) for s in sets])
    sv = np.linalg.svd(stacked, compute_uv=False)
    return float(sv[d - 1]) if sv.size >= d else 0.0


def gen_subspace_instance(d: int, K: int, seed: int, min_conditioning: float = 0.0
                          ) -> InstanceSpec:
    """K random proper subspaces of R^d meeting only at 0.

    ``min_conditioning`` rejects draws whose stacked complement bases have
    d-th singular value below the bound (near-parallel subspaces make the
    iteration arbitrarily slow).
    """
    if d < 2 or K < 2:
        raise ValueError("need d >= 2 and K >= 2")
    rng = _rng(seed)
    for _ in range(MAX_DRAWS):
        dims = rng.integers(1, d, size=K)
        sets = [ConvexSet.subspace(_orthonormal(rng, d, int(k)), d, label=f"L{j + 1}")
                for j, k in enumerate(dims)]
        if complement_rank(sets) == d and _distinct(sets):
            cond = subspace_conditioning(sets)
            if cond < min_conditioning:
                continue
            return InstanceSpec(d, "projection", SUBSPACES, seed, sets=sets, x0=_x0(rng, d),
                                info={"dims": [int(k) for k in dims], "conditioning": cond})
    raise RetryExhausted(f"no subspace family with trivial intersection in {MAX_DRAWS} draws")


def _distinct(sets):
    for a, b in itertools.combinations(sets, 2):
        if a.rows.shape == b.rows.shape and np.allclose(a.rows.T @ a.rows, b.rows.T @ b.rows,
                                                        atol=1e-8):
            return False
    return True


# -- cones ------------------------------------------------------------------


def _axes(rng, d, K):
    if d == 2:
        gap = 2 * np.pi / K
        phi = rng.uniform(0, 2 * np.pi) + gap * np.arange(K) + rng.uniform(-0.15, 0.15, K) * gap
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    axes = []
    for _ in range(200 * K):
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        if all(np.arccos(np.clip(u @ v, -1, 1)) >= 0.5 for v in axes):
            axes.append(u)
            if len(axes) == K:
                return np.array(axes)
    raise RetryExhausted("could not place well separated cone axes")


def _cap_generators(rng, u, half_angle, m):
    d = u.shape[0]
    gens = []
    for _ in range(m):
        r = rng.standard_normal(d)
        r -= (r @ u) * u
        r /= np.linalg.norm(r)
        b = rng.uniform(0.3, 1.0) * half_angle
        gens.append(np.cos(b) * u + np.sin(b) * r)
    return np.array(gens)


def cone_separators(cones: List[ConvexSet], rng, axes=None, samples=64):
    """Check pairwise strict separation of unit sections on sampled members.

    Returns ``(ok, gap)`` where ``gap`` is the least distance between sampled
    unit members of different cones. A (numerically) common direction, or,
    when ``axes`` are given, a sample on the wrong side of ``u_a - u_b``,
    gives ``ok = False``.
    """
    pts = []
    for c in cones:
        g = c.rows / np.linalg.norm(c.rows, axis=1)[:, None]
        w = rng.exponential(size=(samples, g.shape[0]))
        w[: g.shape[0]] = np.eye(g.shape[0])[: min(samples, g.shape[0])]
        p = w @ g
        pts.append(p / np.linalg.norm(p, axis=1)[:, None])
    gap = np.inf
    for a, b in itertools.combinations(range(len(cones)), 2):
        sep = None if axes is None else axes[a] - axes[b]
        dist = np.min(np.linalg.norm(pts[a][:, None, :] - pts[b][None, :, :], axis=2))
        gap = min(gap, dist)
        if dist <= 1e-9:
            return False, 0.0
        if sep is not None and not (np.all(pts[a] @ sep > 0) and np.all(pts[b] @ sep < 0)):
            return False, float(dist)
    return True, float(gap)


def separated_pair(ga: np.ndarray, gb: np.ndarray) -> Optional[np.ndarray]:
    """A vector positive on cone(ga) minus 0 and negative on cone(gb) minus 0."""
    d = ga.shape[1]
    a_ub = np.vstack([-ga, gb])
    res = linprog(np.zeros(d), A_ub=a_ub, b_ub=-np.ones(a_ub.shape[0]),
                  bounds=[(None, None)] * d, method="highs")
    return res.x if res.status == 0 else None


def gen_cone_instance(d: int, K: int, seed: int, separated: bool = False,
                      axes_fn=None) -> InstanceSpec:
    """K pointed cones placed in disjoint angular caps around spread axes.

    Each cone lies within angle ``beta_k`` of its axis ``u_k`` and the caps of
    two cones never meet, so ``u_a - u_b`` separates cone a from cone b and all
    pairwise intersections are {0}. ``separated`` additionally requires a gap
    of more than 0.05 between the unit sections of any two cones.
    """
    if d < 2 or K < 2:
        raise ValueError("need d >= 2 and K >= 2")
    rng = _rng(seed)
    draw = axes_fn or _axes
    for _ in range(MAX_DRAWS):
        axes = draw(rng, d, K)
        ang = np.arccos(np.clip(axes @ axes.T, -1, 1))
        np.fill_diagonal(ang, np.inf)
        nearest = ang.min(axis=1)
        if np.min(nearest) <= 1e-6:
            continue
        cones = []
        for k in range(K):
            beta = 0.4 * min(nearest[k], np.pi / 2)
            m = 2 if d == 2 else int(rng.integers(2, 5))
            gens = _cap_generators(rng, axes[k], beta, m)
            cones.append(ConvexSet.cone(gens, d, label=f"C{k + 1}"))
        sampled_ok, gap = cone_separators(cones, rng, axes)
        if not sampled_ok:
            continue
        if separated and gap <= 0.05:
            continue
        cert = SEPARATED_CONES if separated else TRIVIAL_INTERSECTION
        return InstanceSpec(d, "projection", cert, seed, sets=cones, x0=_x0(rng, d),
                            info={"axes": axes.tolist(), "section_gap": gap})
    raise RetryExhausted(f"no cone family passed the certificate in {MAX_DRAWS} draws")


# -- dictionaries -----------------------------------------------------------


def hull_interior_oracle(atoms: np.ndarray, tol=1e-9) -> bool:
    """0 interior to conv(atoms): full rank and a strictly positive null combination."""
    m, d = atoms.shape
    if np.linalg.matrix_rank(atoms, tol=RANK_TOL) < d:
        return False
    # maximise t subject to sum l_i g_i = 0, sum l_i = 1, l_i >= t
    a_eq = np.vstack([np.hstack([atoms.T, np.zeros((d, 1))]),
                      np.hstack([np.ones((1, m)), np.zeros((1, 1))])])
    b_eq = np.r_[np.zeros(d), 1.0]
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    c = np.zeros(m + 1)
    c[-1] = -1
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return res.status == 0 and -res.fun > tol


def union_inradius(atoms: np.ndarray) -> float:
    """Radius of the largest ball about 0 inside conv(atoms); 0 if 0 is not interior.

    For unit atoms this equals ``min over unit s of max_g <s, g>``.
    """
    if not hull_interior_oracle(atoms):
        return 0.0
    hull = ConvexHull(atoms)
    return float(np.min(-hull.equations[:, -1]))


def gen_dictionary_instance(d: int, K: int, seed: int, symmetric: bool = False,
                            atoms: Optional[int] = None, min_margin: float = 0.0
                            ) -> InstanceSpec:
    """K finite dictionaries of random unit atoms whose union lies in no half-space.

    ``min_margin`` rejects unions whose hull inradius is below the bound.
    """
    from .dictionaries import halfspace_free_check

    if d < 2 or K < 2:
        raise ValueError("need d >= 2 and K >= 2")
    rng = _rng(seed)
    rejected = []
    for _ in range(MAX_DRAWS):
        dicts = []
        for k in range(K):
            m = atoms if atoms is not None else int(rng.integers(2, 7))
            if symmetric:
                half = max(1, m // 2)
                a = rng.standard_normal((half, d))
                a /= np.linalg.norm(a, axis=1)[:, None]
                a = np.vstack([a, -a])
            else:
                a = rng.standard_normal((max(2, m), d))
                a /= np.linalg.norm(a, axis=1)[:, None]
            dicts.append(Dictionary.finite(a, d, label=f"D{k + 1}"))
        ok, witness = halfspace_free_check(dicts)
        union = np.vstack([D.atoms for D in dicts])
        if ok and hull_interior_oracle(union):
            margin = union_inradius(union)
            if margin < min_margin:
                continue
            cert = SYMMETRIC_DICTS if symmetric else HALFSPACE_FREE
            return InstanceSpec(d, "greedy", cert, seed, dictionaries=dicts, x0=_x0(rng, d),
                                info={"rejected_witnesses": rejected, "margin": margin})
        if witness is not None:
            rejected.append(np.round(witness, 12).tolist())
    raise RetryExhausted(f"no half-space free union in {MAX_DRAWS} draws")


# -- oracle -----------------------------------------------------------------


def oracle_cone_projection(cone: ConvexSet, x, max_generators=12, max_dim=8) -> np.ndarray:
    """Projection onto a generated cone by enumerating all generator subsets.

    For each subset the least-squares fit of ``x`` on its span is a candidate
    if its coefficients are nonnegative and the residual makes a non-acute
    angle with every generator. The nearest candidate wins.
    """
    if cone.kind != CONE:
        raise ValueError("oracle needs a generated cone")
    g = cone.rows / np.linalg.norm(cone.rows, axis=1)[:, None]
    m, d = g.shape
    if m > max_generators or d > max_dim:
        raise BudgetExceeded(f"oracle budget is m <= {max_generators}, d <= {max_dim}")
    x = as_vector(x, d)
    scale = max(1.0, np.linalg.norm(x))
    best, best_dist = np.zeros(d), np.inf
    for r in range(0, m + 1):
        for subset in itertools.combinations(range(m), r):
            if r == 0:
                p = np.zeros(d)
            else:
                a = g[list(subset)].T
                coef = np.linalg.lstsq(a, x, rcond=None)[0]
                if np.any(coef < -1e-12 * scale):
                    continue
                p = a @ coef
            resid = x - p
            if np.max(g @ resid) > 1e-9 * scale:
                continue
            dist = np.linalg.norm(resid)
            if dist < best_dist - 1e-15:
                best, best_dist = p, dist
    return best


# -- standard suite -----------------------------------------------------------

SUITE_CLASSES = {
    "subspaces": SUBSPACES,
    "cones": TRIVIAL_INTERSECTION,
    "separated_cones": SEPARATED_CONES,
    "symmetric_dicts": SYMMETRIC_DICTS,
    "dicts": HALFSPACE_FREE,
}
SUITE_SEEDS = range(1, 51)
SUITE_CONDITIONING = 0.05


def suite_parameters(cls: str, seed: int):
    """(d, K) for one seed of a suite class; K cycles fastest."""
    s = seed - 1
    if cls == "subspaces":
        K = 2 + s % 4
        return K + (s // 4) % 3, K
    if cls in ("cones", "separated_cones"):
        return 2 + (s // 5) % 3, 2 + s % 5
    if cls in ("symmetric_dicts", "dicts"):
        return 2 + (s // 4) % 4, 2 + s % 4
    raise KeyError(cls)


def generate_suite_instance(cls: str, seed: int) -> InstanceSpec:
    d, K = suite_parameters(cls, seed)
    if cls == "subspaces":
        inst = gen_subspace_instance(d, K, seed, min_conditioning=SUITE_CONDITIONING)
    elif cls == "cones":
        inst = gen_cone_instance(d, K, seed, separated=False)
    elif cls == "separated_cones":
        inst = gen_cone_instance(d, K, seed, separated=True)
    elif cls == "symmetric_dicts":
        inst = gen_dictionary_instance(d, K, seed, symmetric=True, min_margin=SUITE_CONDITIONING)
    else:
        inst = gen_dictionary_instance(d, K, seed, symmetric=False,
                                       min_margin=SUITE_CONDITIONING)
    inst.id = f"{cls}-{seed:02d}"
    inst.schedule = {"kind": "cyclic", "K": K}
    return inst


def suite_dir():
    return resources.files("projgreedy") / "data" / "suite"


def load_suite(cls: Optional[str] = None) -> List[InstanceSpec]:
    """Read the shipped standard suite (all classes, or one)."""
    from .io import load_instance

    classes = [cls] if cls else list(SUITE_CLASSES)
    out = []
    for c in classes:
        for seed in SUITE_SEEDS:
            path = suite_dir() / c / f"{c}-{seed:02d}.json"
            out.append(load_instance(path))
    return out
