"""Cluster points of traces, J-sets, and checks of the limit-point statements.

In finite dimensions weak and norm cluster points coincide, so the cluster
points of the stored tail iterates stand in for the partial weak limits.
Every pair report is a diagnostic computed from approximate cluster points;
each boolean carries the residual and tolerance that produced it.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence

import numpy as np

from .dictionaries import FINITE, Dictionary, polar_cone_of_dictionary
from .engine import Trace, segment_functional_check
from .errors import (
    InsufficientIterates,
    NotApplicable,
    NotInterleaved,
    PreconditionViolated,
    SegmentIndexOutside,
    UnsupportedDictionary,
)
from .geometry import (
    CONE,
    HALFSPACE,
    HALFSPACE_CONE,
    SUBSPACE,
    ConvexSet,
    as_vector,
    distance,
    is_member,
    project_batch,
    sample_intersection,
    sample_members,
)

DEFAULT_SAMPLES = 64


@dataclass
class ClusterPoint:
    w: np.ndarray
    support: List[int]
    radius: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def to_dict(self):
        return {"w": self.w.tolist(), "norm": self.norm, "support": list(self.support),
                "radius": self.radius}


@dataclass
class JSet:
    w: np.ndarray
    J: FrozenSet[int]
    tol: float
    distances: List[float]

    def to_dict(self):
        return {"J": sorted(self.J), "tol": self.tol, "distances": self.distances}


@dataclass
class Check:
    passed: bool
    residual: float
    tol: float

    def to_dict(self):
        return {"passed": bool(self.passed), "residual": float(self.residual),
                "tol": float(self.tol)}


@dataclass
class PairReport:
    theorem: str
    w: ClusterPoint
    w_prime: ClusterPoint
    J_w: JSet
    J_w_prime: JSet
    pairs: List[tuple]
    checks: Dict[str, Check] = field(default_factory=dict)
    widened_J: Optional[FrozenSet[int]] = None
    label: str = "diagnostic"

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {"theorem": self.theorem, "label": self.label,
                "w": self.w.to_dict(), "w_prime": self.w_prime.to_dict(),
                "J_w": self.J_w.to_dict(), "J_w_prime": self.J_w_prime.to_dict(),
                "pairs": [list(p) for p in self.pairs[:50]], "n_pairs": len(self.pairs),
                "widened_J": sorted(self.widened_J) if self.widened_J is not None else None,
                "checks": {k: c.to_dict() for k, c in self.checks.items()},
                "all_passed": self.all_passed}


def constraint_sets(mode: str, members) -> List[ConvexSet]:
    """The sets A_1..A_K: the sets themselves, or the polar cones of dictionaries."""
    if mode == "greedy":
        return [polar_cone_of_dictionary(D) for D in members]
    return list(members)


# -- clusters -------------------------------------------------------------------


def cluster_points(trace: Trace, eps: float, min_support: int = 3) -> List[ClusterPoint]:
    """Leader clustering of the tail iterates at radius ``eps``.

    A point joins the first cluster whose leader is within ``eps / 2``, so
    every member is within ``eps`` of every other. The representative is the
    last member (an actual iterate). Clusters with fewer than
    ``min_support`` members are dropped.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tail = trace.tail()
    if len(tail) < 3:
        raise InsufficientIterates(f"only {len(tail)} stored tail iterates")
    leaders, members = [], []
    for n, x in tail:
        for c, lead in enumerate(leaders):
            if np.linalg.norm(x - lead) <= eps / 2:
                members[c].append((n, x))
                break
        else:
            leaders.append(x)
            members.append([(n, x)])
    out = []
    for group in members:
        if len(group) < min_support:
            continue
        w = group[-1][1]
        radius = max(float(np.linalg.norm(x - w)) for _, x in group)
        out.append(ClusterPoint(w.copy(), [n for n, _ in group], radius))
    return out


def j_set(w, sets: Sequence[ConvexSet], tol: float) -> JSet:
    """Indices (1-based) of the sets within ``tol`` of ``w``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = as_vector(w)
    dists = [distance(s, w) for s in sets]
    J = frozenset(j + 1 for j, dd in enumerate(dists) if dd <= tol)
    return JSet(w, J, tol, dists)


def interleave(support_w: Sequence[int], support_wp: Sequence[int]) -> List[tuple]:
    """Pairs n_1 < m_1 < n_2 < m_2 < ... with n_k from the first support.

    Each n_k is the latest element of ``support_w`` before m_k, so the
    segments (n_k, m_k) are as short as the supports allow.
    """
    S = np.asarray(sorted(support_w), dtype=np.int64)
    pairs, prev_m = [], -1
    for m in sorted(support_wp):
        k = int(np.searchsorted(S, m)) - 1
        if k >= 0 and S[k] > prev_m:
            pairs.append((int(S[k]), int(m)))
            prev_m = m
    return pairs


def _intersection_samples(sets, J, count, rng):
    if not J:
        return np.zeros((0, sets[0].dim))
    return sample_intersection([sets[j - 1] for j in sorted(J)], count, rng)


def _min_functional(diff, samples, extra=()):
    vals = [float(diff @ a) for a in samples] + [float(diff @ a) for a in extra]
    return min(vals) if vals else 0.0


def _pair_common(trace, w, wp, sets, jtol):
    pairs = interleave(w.support, wp.support)
    if not pairs:
        raise NotInterleaved("the supports do not alternate")
    if jtol is None:
        jtol = max(10 * (w.radius + wp.radius), 1e-9 * max(1.0, w.norm, wp.norm))
    return pairs, j_set(w.w, sets, jtol), j_set(wp.w, sets, jtol)


def _widened(trace, pairs):
    J = set()
    for n, m in pairs:
        for k in range(max(n, 1), m):
            J.add(trace.index_at(k))
    return frozenset(J)


def verify_pair_theorem1(trace: Trace, w: ClusterPoint, wp: ClusterPoint,
                         sets: Sequence[ConvexSet], sample_count: int = DEFAULT_SAMPLES,
                         seed: int = 0, jtol: Optional[float] = None,
                         widen: bool = False) -> PairReport:
    """Check properties (i)-(iv) and the norm growth for the pair (w, w')."""
    pairs, Jw, Jwp = _pair_common(trace, w, wp, sets, jtol)
    tol = max(10 * (w.radius + wp.radius), 1e-12)
    rng = np.random.default_rng(seed)
    diff = wp.w - w.w
    new = len(Jwp.J - Jw.J)
    common = len(Jwp.J & Jw.J)
    rep = PairReport("theorem1", w, wp, Jw, Jwp, pairs)
    rep.checks["i_new_index"] = Check(new >= 1, new, 1)
    rep.checks["ii_common_pair"] = Check(common >= 2, common, 2)
    rep.checks["iii_size"] = Check(len(Jwp.J) >= 3, len(Jwp.J), 3)
    samples = _intersection_samples(sets, Jw.J, sample_count, rng)
    iv = _min_functional(diff, samples, extra=[w.w])
    rep.checks["iv_functional"] = Check(iv >= -tol, iv, tol)
    growth = float(wp.w @ wp.w - w.w @ w.w - diff @ diff)
    rep.checks["norm_growth"] = Check(growth >= -tol, growth, tol)
    if widen:
        rep.widened_J = _widened(trace, pairs)
        ws = _intersection_samples(sets, rep.widened_J, sample_count, rng)
        val = _min_functional(diff, ws)
        rep.checks["iv_widened"] = Check(val >= -tol, val, tol)
    return rep


def verify_pair_theorem2(trace: Trace, w: ClusterPoint, wp: ClusterPoint,
                         sets: Sequence[ConvexSet], sample_count: int = DEFAULT_SAMPLES,
                         seed: int = 0, jtol: Optional[float] = None,
                         widen: bool = False) -> PairReport:
    """Two-sided functional inequalities for an interleaved pair."""
    pairs, Jw, Jwp = _pair_common(trace, w, wp, sets, jtol)
    inside = Jw.J & Jwp.J
    for n, m in pairs:
        for k in range(n + 1, m):
            if trace.index_at(k) not in inside:
                raise SegmentIndexOutside(
                    f"step {k} uses index {trace.index_at(k)} outside J(w) ∩ J(w') = "
                    f"{sorted(inside)}")
    tol = max(10 * (w.radius + wp.radius), 1e-12)
    rng = np.random.default_rng(seed)
    diff = wp.w - w.w
    rep = PairReport("theorem2", w, wp, Jw, Jwp, pairs)
    a = _intersection_samples(sets, Jw.J, sample_count, rng)
    val = _min_functional(diff, a, extra=[w.w])
    rep.checks["i_functional_w"] = Check(val >= -tol, val, tol)
    b = _intersection_samples(sets, Jwp.J, sample_count, rng)
    val = _min_functional(diff, b, extra=[wp.w])
    rep.checks["ii_functional_w_prime"] = Check(val >= -tol, val, tol)
    rep.checks["distinct"] = Check(float(np.linalg.norm(diff)) > tol,
                                   float(np.linalg.norm(diff)), tol)
    if widen:
        rep.widened_J = _widened(trace, pairs)
        ws = _intersection_samples(sets, rep.widened_J, sample_count, rng)
        val = _min_functional(diff, ws)
        rep.checks["i_widened"] = Check(val >= -tol, val, tol)
    return rep


# -- weak internal points ---------------------------------------------------------


def _anchor_members(s: ConvexSet) -> np.ndarray:
    if s.kind == CONE:
        return np.asarray(s.rows)
    if s.kind == SUBSPACE:
        return np.asarray(s.rows)
    if s.kind == HALFSPACE:
        return -np.asarray(s.vector)[None, :]
    return np.zeros((0, s.dim))


def wip_check(s: ConvexSet, sample_count: int = DEFAULT_SAMPLES, seed: int = 0):
    """Whether 0 looks like a weak internal point of ``s`` on sampled members.

    For each member ``a`` (anchors first, then projected Gaussian points)
    search ``lam in {1, 1/2, ..., 2**-20}`` with ``-lam * a`` in ``s``.
    Returns ``(ok, witness)`` where the witness is the first failing member.
    """
    if not s.contains_origin():
        raise PreconditionViolated("wip_check needs a set containing 0")
    rng = np.random.default_rng(seed)
    samples = np.vstack([_anchor_members(s), sample_members(s, sample_count, rng)])
    for a in samples:
        if not any(is_member(s, -(2.0 ** -k) * a) for k in range(21)):
            return False, a
    return True, None


# -- separation -------------------------------------------------------------------


@dataclass
class SeparationEstimate:
    value: float
    mode: str
    quadruple: tuple
    n_dirs: int
    depth: int

    def to_dict(self):
        return {"value": self.value, "mode": self.mode, "quadruple": list(self.quadruple),
                "n_dirs": self.n_dirs, "depth": self.depth, "kind": "upper_bound_estimate"}


def _support_values(dicts: Sequence[Dictionary], S: np.ndarray) -> np.ndarray:
    """``max_{g in union} <s, g>`` for each row s of S."""
    best = np.full(S.shape[0], -np.inf)
    for D in dicts:
        if D.kind == FINITE:
            vals = np.max(S @ D.atoms.T, axis=1)
        else:
            if D.cone.kind == HALFSPACE_CONE:
                raise UnsupportedDictionary("separation needs generator-represented sections")
            P = project_batch(D.cone, S)
            pn = np.linalg.norm(P, axis=1)
            gmax = np.max(S @ D.generators().T, axis=1)
            vals = np.where(pn > 1e-14, pn, np.minimum(gmax, 0.0))
        best = np.maximum(best, vals)
    return best


def _sphere_min(f, d, rng, n_dirs, depth):
    S = rng.standard_normal((n_dirs, d))
    S /= np.linalg.norm(S, axis=1)[:, None]
    vals = f(S)
    order = np.argsort(vals)[:8]
    best_val = float(vals[order[0]])
    for start in order:
        s, v = S[start], float(vals[start])
        step = 0.2
        for _ in range(depth):
            trial = s + step * rng.standard_normal((32, d))
            trial /= np.linalg.norm(trial, axis=1)[:, None]
            tv = f(trial)
            k = int(np.argmin(tv))
            if tv[k] < v:
                s, v = trial[k], float(tv[k])
            else:
                step *= 0.5
        best_val = min(best_val, v)
    return best_val


def separation_value(members, quadruple=None, n_dirs: int = 4096, depth: int = 60,
                     seed: int = 0, samples: int = 64) -> SeparationEstimate:
    """Estimate of the four-index separation quantity.

    Dictionaries: ``inf_{|s|=1} max_{g in D_i ∪ D_j ∪ D_k ∪ D_l} <s, g>`` from
    ``n_dirs`` random directions refined by ``depth`` rounds of local random
    search (an upper bound on the infimum). Sets (cones): least distance
    between sampled unit members of ``A_{i,j,k}`` and ``A_{i,j,l}`` over the
    triples sharing two indices (``inf`` when those sections are empty).
    With ``quadruple=None`` all 4-subsets are scanned and K < 4 is rejected.
    """
    K = len(members)
    if quadruple is None:
        if K < 4:
            raise NotApplicable(f"separation needs four indices, instance has K={K}")
        quads = list(itertools.combinations(range(1, K + 1), 4))
    else:
        if len(quadruple) != 4:
            raise NotApplicable("separation needs exactly four indices")
        quads = [tuple(int(q) for q in quadruple)]
    rng = np.random.default_rng(seed)
    is_dict = isinstance(members[0], Dictionary)
    best, best_q = np.inf, quads[0]
    d = members[0].dim
    for q in quads:
        if is_dict:
            chosen = [members[i - 1] for i in dict.fromkeys(q)]
            val = _sphere_min(lambda S: _support_values(chosen, S), d, rng, n_dirs, depth)
        else:
            val = _triple_gap(members, q, rng, samples)
        if val < best:
            best, best_q = val, q
    return SeparationEstimate(float(best), "dictionaries" if is_dict else "sets", best_q,
                              n_dirs if is_dict else samples, depth if is_dict else 0)


def _triple_gap(sets, q, rng, samples):
    idx = list(dict.fromkeys(q))
    best = np.inf
    for shared in itertools.combinations(idx, 2):
        rest = [i for i in idx if i not in shared]
        for k, l in itertools.combinations(rest, 2):
            pts = []
            for extra in (k, l):
                tri = [sets[i - 1] for i in (*shared, extra)]
                p = sample_intersection(tri, samples, rng)
                nrm = np.linalg.norm(p, axis=1)
                p = p[nrm > 1e-9] / nrm[nrm > 1e-9, None]
                pts.append(p)
            if len(pts[0]) and len(pts[1]):
                dist = np.linalg.norm(pts[0][:, None, :] - pts[1][None, :, :], axis=2)
                best = min(best, float(dist.min()))
    return best


# -- segment functionals ------------------------------------------------------------


def functional_segments(trace: Trace, sets: Sequence[ConvexSet], n_segments: int = 32,
                        max_len: int = 3, sample_count: int = DEFAULT_SAMPLES, seed: int = 0):
    """Run the segment functional check on random admissible (segment, a) pairs.

    A segment (s, t] uses the index set J of its own steps; functionals are
    sampled from the intersection of the sets in J. Only segments whose
    needed iterates are stored are drawn. Returns the list of reports.
    """
    rng = np.random.default_rng(seed)
    mode = trace.mode
    stored = trace.iterates
    cache = {}
    reports = []
    if trace.steps < 1:
        return reports
    tries = 0
    while len(reports) < n_segments * sample_count and tries < 20 * n_segments:
        tries += 1
        t = int(rng.integers(1, trace.steps + 1))
        s = max(0, t - int(rng.integers(1, max_len + 1)))
        need = [s, t] if mode == "projection" else list(range(s, t + 1))
        if any(n not in stored for n in need):
            continue
        J = frozenset(trace.index_at(n) for n in range(s + 1, t + 1))
        if J not in cache:
            cache[J] = _intersection_samples(sets, J, sample_count, rng)
        for a in cache[J][:sample_count]:
            reports.append(segment_functional_check(trace, (s, t), a, J, mode, sets))
    return reports


# -- full report ---------------------------------------------------------------------


@dataclass
class LimitReport:
    clusters: List[ClusterPoint]
    jsets: List[JSet]
    pairs: List[PairReport]
    final_norm: float
    r_est: float
    eps: float
    candidates: List[int] = field(default_factory=list)
    separation: Optional[SeparationEstimate] = None
    notes: List[str] = field(default_factory=list)

    @property
    def counterexample(self) -> bool:
        return bool(self.candidates)

    def to_dict(self):
        return {"label": "diagnostic", "eps": self.eps, "final_norm": self.final_norm,
                "r_est": self.r_est,
                "clusters": [c.to_dict() for c in self.clusters],
                "jsets": [j.to_dict() for j in self.jsets],
                "pairs": [p.to_dict() for p in self.pairs],
                "counterexample_candidates": self.candidates,
                "separation": self.separation.to_dict() if self.separation else None,
                "notes": self.notes}


def _pair_reports(trace, clusters, sets, sample_count, seed, widen, notes):
    reports = []
    for a, b in itertools.permutations(range(len(clusters)), 2):
        try:
            reports.append(verify_pair_theorem1(trace, clusters[a], clusters[b], sets,
                                                sample_count, seed, widen=widen))
        except NotInterleaved:
            continue
        try:
            reports.append(verify_pair_theorem2(trace, clusters[a], clusters[b], sets,
                                                sample_count, seed, widen=widen))
        except (NotInterleaved, SegmentIndexOutside) as exc:
            notes.append(f"theorem2 pair ({a}, {b}) skipped: {exc}")
    return reports


def analyze(trace: Trace, members, eps: float = 1e-3, sample_count: int = DEFAULT_SAMPLES,
            seed: int = 0, widen: bool = False, converged_tol: float = 1e-6,
            separation: bool = False, max_pair_clusters: int = 8) -> LimitReport:
    """Clusters, J-sets and pair checks for one trace.

    A counterexample candidate is a nonzero cluster point whose Theorem 1
    pair report passes every check, found both at ``eps`` and at ``eps / 10``,
    on a run whose norms did not converge to 0 (``R = 0`` already forces the
    limit set to be {0}).
    """
    sets = constraint_sets(trace.mode, members)
    notes = []
    clusters = cluster_points(trace, eps)
    jsets = [j_set(c.w, sets, max(10 * c.radius, 1e-9 * max(1.0, c.norm))) for c in clusters]
    converged = trace.final_norm <= converged_tol
    if converged and len(clusters) > max_pair_clusters:
        pairs = []
        notes.append(f"{len(clusters)} clusters on a run with final norm <= {converged_tol:g}; "
                     "pair checks skipped (the limit set is {0})")
    else:
        pairs = _pair_reports(trace, clusters, sets, sample_count, seed, widen, notes)
    rep = LimitReport(clusters, jsets, pairs, trace.final_norm, trace.r_est, eps, notes=notes)
    if not converged:
        floor = max(10 * eps, converged_tol)
        flagged = _flagged(pairs, floor)
        if flagged:
            fine = cluster_points(trace, eps / 10)
            fine_pairs = _pair_reports(trace, fine, sets, sample_count, seed, False, [])
            if _flagged(fine_pairs, max(eps, converged_tol)):
                rep.candidates = flagged
                notes.append("counterexample candidate: nonzero cluster point with a "
                             "partner passing every theorem-1 check at eps and eps/10")
    if separation and len(members) >= 4:
        try:
            rep.separation = separation_value(members, seed=seed)
        except (NotApplicable, UnsupportedDictionary) as exc:
            notes.append(f"separation skipped: {exc}")
    return rep


def _flagged(pairs, floor):
    out = []
    for i, p in enumerate(pairs):
        if p.theorem == "theorem1" and p.all_passed and p.w.norm > floor:
            out.append(i)
    return out
