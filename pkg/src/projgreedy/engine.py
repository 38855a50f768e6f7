"""The projection iteration and the greedy iteration, with tracing.

Both runs advance in chunks through the compiled kernels: the schedule emits
a block of indices, the kernel consumes it (or stops early) and reports
per-step scalars plus every iterate of the block, of which the engine keeps a
thinned subset and a tail buffer.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels as K
from ._jit import BACKEND
from .dictionaries import (
    Dictionary,
    pack_dictionaries,
    polar_cone_of_dictionary,
    union_is_halfspace_free,
)
from .errors import (
    DimensionMismatch,
    InstanceInvalid,
    NumericalFailure,
    PreconditionViolated,
)
from .geometry import ConvexSet, as_vector, is_member, pack
from .schedules import RNG_NAME, Schedule

CHUNK = 1 << 14

STOP_REASONS = {
    K.RUNNING: "max_iters",
    K.STOP_NORM: "norm_tol",
    K.STOP_STAGNATION: "stagnation",
    K.STOP_INVARIANT: "invariant",
}
INVARIANT_NAMES = {
    K.INV_DECAY: "decay",
    K.INV_MONOTONE: "monotone",
    K.INV_MEMBERSHIP: "membership",
    K.INV_PYTH: "pythagoras",
    K.INV_ORTHOGONAL: "orthogonality",
}


@dataclass(frozen=True)
class StopRule:
    max_iters: int = 100_000
    norm_tol: float = 0.0
    stagnation: Optional[Tuple[int, float]] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.norm_tol < 0:
            raise ValueError("norm_tol must be >= 0")
        if self.stagnation is not None:
            w, eps = self.stagnation
            if w < 1 or eps < 0:
                raise ValueError("stagnation needs window >= 1 and eps >= 0")

    def to_dict(self):
        return {"max_iters": self.max_iters, "norm_tol": self.norm_tol,
                "stagnation": list(self.stagnation) if self.stagnation else None}

    @classmethod
    def from_dict(cls, d):
        st = d.get("stagnation")
        return cls(int(d.get("max_iters", 100_000)), float(d.get("norm_tol", 0.0)),
                   tuple(st) if st else None)


@dataclass
class Trace:
    """Per-step records of one run.

    Step ``n`` (1-based) moved ``x_{n-1}`` to ``x_n`` using set/dictionary
    ``index[n-1]``. ``iterates`` maps n to the stored vectors: every
    ``thin``-th iterate, ``x_0``, the final iterate and the last ``tail``
    iterates.
    """

    mode: str
    x0: np.ndarray
    index: np.ndarray
    norm: np.ndarray
    step_norm: np.ndarray
    coefficient: Optional[np.ndarray]
    distances: Optional[np.ndarray]
    iterates: Dict[int, np.ndarray]
    tail_start: int
    metadata: dict = field(default_factory=dict)
    violation: Optional[dict] = None

    @property
    def steps(self) -> int:
        return int(self.index.size)

    @property
    def K(self) -> int:
        return int(self.metadata.get("K", int(self.index.max()) if self.index.size else 0))

    @property
    def final(self) -> np.ndarray:
        return self.iterates[self.steps]

    @property
    def final_norm(self) -> float:
        return float(np.linalg.norm(self.final))

    @property
    def stop_reason(self) -> str:
        return self.metadata.get("stop_reason", "")

    @property
    def r_est(self) -> float:
        """Infimum of the recorded norms (an estimate of lim |x_n|)."""
        n0 = float(np.linalg.norm(self.x0))
        return float(min(n0, self.norm.min())) if self.norm.size else n0

    def norm_at(self, n: int) -> float:
        return float(np.linalg.norm(self.x0)) if n == 0 else float(self.norm[n - 1])

    def index_at(self, n: int) -> int:
        return int(self.index[n - 1])

    def iterate(self, n: int) -> np.ndarray:
        try:
            return self.iterates[n]
        except KeyError:
            raise KeyError(f"iterate {n} was not stored (thinning)") from None

    def tail(self) -> List[Tuple[int, np.ndarray]]:
        return [(n, self.iterates[n]) for n in sorted(self.iterates) if n >= self.tail_start]

    def summability_residual(self) -> float:
        """``sum |x_n - x_{n-1}|^2 - (|x_0|^2 - |x_N|^2)``."""
        n0 = float(np.linalg.norm(self.x0)) ** 2
        return float(np.sum(self.step_norm ** 2) - (n0 - self.final_norm ** 2))


def _validate_x0(x0, d):
    v = as_vector(x0)
    if v.shape[0] != d:
        raise DimensionMismatch(f"x0 has dimension {v.shape[0]}, instance has {d}")
    return v.copy()


def _drive(kernel_call, schedule, x, K_sets, stop, record_distances, thin, tail, greedy):
    d = x.shape[0]
    state = schedule.start()
    x0 = x.copy()
    idx_parts, norm_parts, step_parts, coef_parts, dist_parts = [], [], [], [], []
    iterates = {0: x0.copy()}
    tail_buf = deque(maxlen=max(tail, 1))
    tail_buf.append((0, x0.copy()))
    done = 0
    stag = 0
    reason = "max_iters"
    violation = None
    while done < stop.max_iters:
        want = min(CHUNK, stop.max_iters - done)
        idx = state.take(want)
        if idx.size == 0:
            reason = "schedule_exhausted"
            break
        n = idx.size
        out_norm = np.empty(n)
        out_step = np.empty(n)
        out_coef = np.zeros(n)
        out_dist = np.zeros((n if record_distances else 0, K_sets))
        out_x = np.empty((n, d))
        got, code, stag, inv = kernel_call(idx - 1, x, stag, out_norm, out_step, out_coef,
                                           out_dist, out_x)
        idx_parts.append(idx[:got])
        norm_parts.append(out_norm[:got])
        step_parts.append(out_step[:got])
        coef_parts.append(out_coef[:got])
        if record_distances:
            dist_parts.append(out_dist[:got])
        for j in range(got):
            nn = done + j + 1
            if nn % thin == 0:
                iterates[nn] = out_x[j].copy()
        for j in range(max(0, got - tail_buf.maxlen), got):
            tail_buf.append((done + j + 1, out_x[j].copy()))
        done += got
        if code == K.STOP_SOLVER:
            raise NumericalFailure(f"cone projection failed at step {done + 1}")
        if code != K.RUNNING:
            reason = STOP_REASONS[code]
            if code == K.STOP_INVARIANT:
                violation = {"step": done, "invariant": INVARIANT_NAMES[inv],
                             "index": int(idx[got - 1])}
            break
        if done >= stop.max_iters:
            reason = "max_iters"
    for nn, v in tail_buf:
        iterates[nn] = v
    iterates[done] = x.copy()
    cat = lambda parts, dt=float: np.concatenate(parts) if parts else np.empty(0, dt)  # noqa: E731
    trace = Trace(
        mode="greedy" if greedy else "projection",
        x0=x0,
        index=cat(idx_parts, np.int64),
        norm=cat(norm_parts),
        step_norm=cat(step_parts),
        coefficient=cat(coef_parts) if greedy else None,
        distances=(np.concatenate(dist_parts) if dist_parts else np.zeros((0, K_sets)))
        if record_distances else None,
        iterates=iterates,
        tail_start=tail_buf[0][0] if tail_buf else done,
        violation=violation,
    )
    trace.metadata.update({"stop_reason": reason, "steps": done, "K": K_sets,
                           "schedule": schedule.to_dict(), "rng": RNG_NAME,
                           "backend": BACKEND, "stop": stop.to_dict(), "thin": thin,
                           "tail": tail})
    return trace


def _stag(stop):
    return (int(stop.stagnation[0]), float(stop.stagnation[1])) if stop.stagnation else (0, 0.0)


def validate_sets(sets: Sequence[ConvexSet]):
    if len(sets) < 2:
        raise InstanceInvalid("need K >= 2 sets")
    d = sets[0].dim
    for s in sets:
        if s.dim != d:
            raise DimensionMismatch("all sets must share one dimension")
        if not s.contains_origin():
            raise InstanceInvalid(f"{s!r} does not contain 0")


def validate_dictionaries(dicts: Sequence[Dictionary]):
    if len(dicts) < 2:
        raise InstanceInvalid("need K >= 2 dictionaries")
    d = dicts[0].dim
    if any(D.dim != d for D in dicts):
        raise DimensionMismatch("all dictionaries must share one dimension")
    ok, witness = union_is_halfspace_free(dicts)
    if not ok:
        raise InstanceInvalid(f"the union of the dictionaries lies in a half-space "
                              f"(witness {np.round(witness, 6).tolist()})")


def run_projection(sets: Sequence[ConvexSet], schedule: Schedule, x0, stop: StopRule, *,
                   checked=True, record_distances=False, thin=100, tail=None,
                   validate=True) -> Trace:
    """Iterate ``x_n = P_{i(n)} x_{n-1}``."""
    if validate:
        validate_sets(sets)
    if schedule.K != len(sets):
        raise InstanceInvalid(f"schedule has K={schedule.K} but there are {len(sets)} sets")
    p = pack(sets)
    x = _validate_x0(x0, p.vecs.shape[1])
    tail = 100 * len(sets) if tail is None else tail
    win, eps = _stag(stop)

    def call(idx, x, stag, out_norm, out_step, out_coef, out_dist, out_x):
        return K.run_projection_chunk(p.kinds, p.mats, p.counts, p.scals, p.vecs, idx, x,
                                      float(stop.norm_tol), win, eps, stag, bool(checked),
                                      bool(record_distances), out_norm, out_step, out_dist, out_x)

    return _drive(call, schedule, x, len(sets), stop, record_distances, thin, tail, False)


def run_greedy(dicts: Sequence[Dictionary], schedule: Schedule, x0, stop: StopRule, *,
               checked=True, record_distances=False, thin=100, tail=None,
               validate=True) -> Trace:
    """Iterate ``x_n = G_{i(n)} x_{n-1}`` (pure greedy steps)."""
    if validate:
        validate_dictionaries(dicts)
    if schedule.K != len(dicts):
        raise InstanceInvalid(f"schedule has K={schedule.K} but there are {len(dicts)} "
                              "dictionaries")
    p = pack_dictionaries(dicts)
    if record_distances:
        q = pack([polar_cone_of_dictionary(D) for D in dicts])
    else:
        q = pack([ConvexSet.subspace(np.zeros((0, dicts[0].dim)), dicts[0].dim)])
    x = _validate_x0(x0, p.vecs.shape[1])
    tail = 100 * len(dicts) if tail is None else tail
    win, eps = _stag(stop)

    def call(idx, x, stag, out_norm, out_step, out_coef, out_dist, out_x):
        return K.run_greedy_chunk(p.kinds, p.mats, p.counts, p.scals, p.vecs, idx, x,
                                  float(stop.norm_tol), win, eps, stag, bool(checked),
                                  bool(record_distances),
                                  q.kinds, q.mats, q.counts,
                                  out_norm, out_step, out_coef, out_dist, out_x)

    return _drive(call, schedule, x, len(dicts), stop, record_distances, thin, tail, True)


@dataclass(frozen=True)
class SegmentReport:
    mode: str
    segment: Tuple[int, int]
    passed: bool
    margin: float
    tol: float


def segment_functional_check(trace: Trace, segment, a, J, mode: str, sets) -> SegmentReport:
    """Sign check of the functional ``<x_t - x_s, a>`` over the steps (s, t].

    ``sets`` are the sets of the run (projection) or the polar cones of its
    dictionaries (greedy); ``a`` must lie in every set indexed by ``J``.
    Projection mode checks the telescoped bound
    ``<x_t - x_s, a> >= (|x_t|^2 - |x_s|^2) / 2``; greedy mode checks each
    step ``<x_n - x_{n-1}, a> >= 0``. ``margin`` is the smallest slack seen.
    """
    s, t = int(segment[0]), int(segment[1])
    J = {int(j) for j in J}
    if not 0 <= s < t <= trace.steps:
        raise PreconditionViolated(f"segment {segment} outside 0..{trace.steps}")
    a = as_vector(a)
    used = {trace.index_at(n) for n in range(s + 1, t + 1)}
    if not used <= J:
        raise PreconditionViolated(f"segment uses indices {sorted(used - J)} outside J")
    for j in J:
        if not is_member(sets[j - 1], a):
            raise PreconditionViolated(f"functional is not a member of set {j}")
    if mode == "projection":
        xs, xt = trace.iterate(s), trace.iterate(t)
        margin = float((xt - xs) @ a - 0.5 * (xt @ xt - xs @ xs))
        tol = 1e-8
    elif mode == "greedy":
        margin = np.inf
        prev = trace.iterate(s)
        for n in range(s + 1, t + 1):
            cur = trace.iterate(n)
            margin = min(margin, float((cur - prev) @ a))
            prev = cur
        tol = 1e-10
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return SegmentReport(mode, (s, t), margin >= -tol, margin, tol)
