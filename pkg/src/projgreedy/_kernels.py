"""Hot loops: metric projections, the greedy selector and the two iterations.

Sets and dictionaries reach these kernels in a packed, padded layout so a
whole run executes without returning to Python:

    kinds  int64[K]          kind code per set
    mats   float64[K, M, d]  basis / generators / normals / atoms (row-wise)
    counts int64[K]          number of valid rows of ``mats[k]``
    scals  float64[K]        half-space offset or ball radius
    vecs   float64[K, d]     half-space normal, ball centre or affine offset

Everything here is numba-compatible numpy and also runs uncompiled.
"""

import numpy as np

from ._jit import njit

SUBSPACE = 0
AFFINE = 1
HALFSPACE = 2
BALL = 3
GEN_CONE = 4
HS_CONE = 5
FINITE = 6

OK = 0
SOLVER_FAILURE = 1

# stop codes returned by the run kernels
RUNNING = 0
STOP_NORM = 1
STOP_STAGNATION = 2
STOP_INVARIANT = 3
STOP_SOLVER = 4

# invariant codes
INV_NONE = 0
INV_DECAY = 1
INV_MONOTONE = 2
INV_MEMBERSHIP = 3
INV_PYTH = 4
INV_ORTHOGONAL = 5

NNLS_TOL = 1e-12
NNLS_ITER_FACTOR = 100
LSTSQ_RCOND = 1e-13
ZERO_CHOICE_REL = 1e-14

DECAY_SLACK = 1e-10
MONOTONE_REL = 1e-12
MEMBER_REL = 1e-9
PYTH_TOL = 1e-10
ORTH_TOL = 1e-10


@njit
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit
def _norm(a):
    return np.sqrt(_dot(a, a))


@njit
def _span_solve(gens, idx, x, proj):
    """Least squares of ``x`` on the generators ``idx``.

    Returns the coefficients and writes the orthogonal projection of ``x``
    onto their span into ``proj``. Uses the thin SVD so the projection stays
    accurate when the coefficients are badly conditioned.
    """
    d = x.shape[0]
    p = idx.shape[0]
    a = np.empty((d, p))
    for q in range(p):
        for k in range(d):
            a[k, q] = gens[idx[q], k]
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = 0
    for q in range(s.shape[0]):
        if s[q] > LSTSQ_RCOND * s[0]:
            r += 1
    ux = np.zeros(r)
    for q in range(r):
        ux[q] = _dot(u[:, q], x)
    for k in range(d):
        acc = 0.0
        for q in range(r):
            acc += u[k, q] * ux[q]
        proj[k] = acc
    z = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for q in range(r):
            acc += vt[q, j] * ux[q] / s[q]
        z[j] = acc
    return z


@njit
def nnls_cone(gens, m, x, out):
    """Project ``x`` onto the cone spanned by the first ``m`` rows of ``gens``.

    Lawson-Hanson active set on the generator coefficients. The entering
    index is the lowest one among maximal gradients, so ties resolve to the
    lexicographically first active set. An index that cannot enter without
    immediately leaving again is blocked for the rest of the solve. Returns a
    status code.
    """
    d = x.shape[0]
    coef = np.zeros(m)
    passive = np.zeros(m, dtype=np.bool_)
    blocked = np.zeros(m, dtype=np.bool_)
    proj = np.zeros(d)
    cand = np.zeros(d)
    tol = NNLS_TOL * max(1.0, _norm(x))
    max_iter = NNLS_ITER_FACTOR * max(m, 1)
    it = 0
    while True:
        enter = -1
        best = tol
        for i in range(m):
            if not passive[i] and not blocked[i]:
                g = 0.0
                for k in range(d):
                    g += gens[i, k] * (x[k] - proj[k])
                if g > best:
                    best = g
                    enter = i
        if enter < 0:
            break
        passive[enter] = True
        while True:
            it += 1
            if it > max_iter:
                for k in range(d):
                    out[k] = proj[k]
                return SOLVER_FAILURE
            p = 0
            for i in range(m):
                if passive[i]:
                    p += 1
            idx = np.empty(p, dtype=np.int64)
            q = 0
            for i in range(m):
                if passive[i]:
                    idx[q] = i
                    q += 1
            z = _span_solve(gens, idx, x, cand)
            feasible = True
            for q in range(p):
                if z[q] <= 0.0:
                    feasible = False
                    break
            if feasible:
                for i in range(m):
                    coef[i] = 0.0
                for q in range(p):
                    coef[idx[q]] = z[q]
                for k in range(d):
                    proj[k] = cand[k]
                break
            alpha = 1.0
            for q in range(p):
                if z[q] <= 0.0:
                    c = coef[idx[q]]
                    den = c - z[q]
                    t = c / den if den > 0.0 else 0.0
                    if t < alpha:
                        alpha = t
            for q in range(p):
                j = idx[q]
                coef[j] += alpha * (z[q] - coef[j])
            cmax = 0.0
            for q in range(p):
                if coef[idx[q]] > cmax:
                    cmax = coef[idx[q]]
            cut = 1e-15 * max(cmax, 1e-300)
            for q in range(p):
                j = idx[q]
                if coef[j] <= cut:
                    coef[j] = 0.0
                    passive[j] = False
            if not passive[enter]:
                blocked[enter] = True
        if not passive[enter]:
            # the blocked index left; recompute the projection on what remains
            p = 0
            for i in range(m):
                if passive[i]:
                    p += 1
            if p == 0:
                for k in range(d):
                    proj[k] = 0.0
            else:
                idx = np.empty(p, dtype=np.int64)
                q = 0
                for i in range(m):
                    if passive[i]:
                        idx[q] = i
                        q += 1
                z = _span_solve(gens, idx, x, proj)
    for k in range(d):
        out[k] = proj[k]
    return OK


@njit
def project_packed(kind, mat, count, scal, vec, x, out):
    """Metric projection of ``x`` onto one packed set; writes into ``out``."""
    d = x.shape[0]
    if kind == SUBSPACE:
        for k in range(d):
            out[k] = 0.0
        for i in range(count):
            c = _dot(mat[i], x)
            for k in range(d):
                out[k] += c * mat[i, k]
        return OK
    if kind == AFFINE:
        for k in range(d):
            out[k] = vec[k]
        for i in range(count):
            c = 0.0
            for k in range(d):
                c += mat[i, k] * (x[k] - vec[k])
            for k in range(d):
                out[k] += c * mat[i, k]
        return OK
    if kind == HALFSPACE:
        s = _dot(vec, x) - scal
        for k in range(d):
            out[k] = x[k]
        if s > 0.0:
            for k in range(d):
                out[k] -= s * vec[k]
        return OK
    if kind == BALL:
        nv = 0.0
        for k in range(d):
            nv += (x[k] - vec[k]) ** 2
        nv = np.sqrt(nv)
        if nv > scal:
            f = scal / nv
            for k in range(d):
                out[k] = vec[k] + f * (x[k] - vec[k])
        else:
            for k in range(d):
                out[k] = x[k]
        return OK
    if kind == GEN_CONE:
        return nnls_cone(mat, count, x, out)
    if kind == HS_CONE:
        # Moreau: the polar of {y : <y, n_i> <= 0} is cone(n_i)
        tmp = np.empty(d)
        status = nnls_cone(mat, count, x, tmp)
        for k in range(d):
            out[k] = x[k] - tmp[k]
        return status
    return SOLVER_FAILURE


@njit
def select_packed(kind, mat, count, scal, vec, x, atom):
    """Greedy selector. Writes the atom (or zeros) and returns (coef, status)."""
    d = x.shape[0]
    thr = ZERO_CHOICE_REL * max(1.0, _norm(x))
    status = OK
    if kind == FINITE:
        best = -np.inf
        j = -1
        for i in range(count):
            c = _dot(mat[i], x)
            if c > best:
                best = c
                j = i
        if j >= 0 and best > thr:
            for k in range(d):
                atom[k] = mat[j, k]
            return best, status
    else:
        p = np.empty(d)
        status = project_packed(kind, mat, count, scal, vec, x, p)
        pn = _norm(p)
        if pn > thr:
            for k in range(d):
                atom[k] = p[k] / pn
            return _dot(x, atom), status
    for k in range(d):
        atom[k] = 0.0
    return 0.0, status


@njit
def project_many(kind, mat, count, scal, vec, xs, out):
    """Row-wise projection of a batch of points; returns the worst status."""
    worst = OK
    for r in range(xs.shape[0]):
        s = project_packed(kind, mat, count, scal, vec, xs[r], out[r])
        if s != OK:
            worst = s
    return worst


@njit
def run_projection_chunk(kinds, mats, counts, scals, vecs, idx, x,
                         norm_tol, stag_window, stag_eps, stag_count,
                         checked, record_dist,
                         out_norm, out_step, out_dist, out_x):
    """Advance ``x`` through ``idx`` (0-based set indices) in place.

    Returns (steps_done, stop_code, stag_count, invariant_code).
    """
    d = x.shape[0]
    K = kinds.shape[0]
    y = np.empty(d)
    tmp = np.empty(d)
    prev_sq = _dot(x, x)
    for n in range(idx.shape[0]):
        i = idx[n]
        status = project_packed(kinds[i], mats[i], counts[i], scals[i], vecs[i], x, y)
        if status != OK:
            return n, STOP_SOLVER, stag_count, INV_NONE
        step_sq = 0.0
        for k in range(d):
            step_sq += (y[k] - x[k]) ** 2
            x[k] = y[k]
        cur_sq = _dot(x, x)
        cur = np.sqrt(cur_sq)
        out_norm[n] = cur
        out_step[n] = np.sqrt(step_sq)
        for k in range(d):
            out_x[n, k] = x[k]
        if record_dist:
            for j in range(K):
                project_packed(kinds[j], mats[j], counts[j], scals[j], vecs[j], x, tmp)
                dd = 0.0
                for k in range(d):
                    dd += (x[k] - tmp[k]) ** 2
                out_dist[n, j] = np.sqrt(dd)
        if checked:
            if step_sq > prev_sq - cur_sq + DECAY_SLACK:
                return n + 1, STOP_INVARIANT, stag_count, INV_DECAY
            if cur > np.sqrt(prev_sq) * (1.0 + MONOTONE_REL):
                return n + 1, STOP_INVARIANT, stag_count, INV_MONOTONE
            project_packed(kinds[i], mats[i], counts[i], scals[i], vecs[i], x, tmp)
            dd = 0.0
            for k in range(d):
                dd += (x[k] - tmp[k]) ** 2
            if np.sqrt(dd) > MEMBER_REL * max(1.0, cur):
                return n + 1, STOP_INVARIANT, stag_count, INV_MEMBERSHIP
        prev_sq = cur_sq
        if cur <= norm_tol:
            return n + 1, STOP_NORM, stag_count, INV_NONE
        if stag_window > 0:
            if out_step[n] <= stag_eps:
                stag_count += 1
            else:
                stag_count = 0
            if stag_count >= stag_window:
                return n + 1, STOP_STAGNATION, stag_count, INV_NONE
    return idx.shape[0], RUNNING, stag_count, INV_NONE


@njit
def run_greedy_chunk(kinds, mats, counts, scals, vecs, idx, x,
                     norm_tol, stag_window, stag_eps, stag_count,
                     checked, record_dist, dist_kinds, dist_mats, dist_counts,
                     out_norm, out_step, out_coef, out_dist, out_x):
    """Greedy counterpart of :func:`run_projection_chunk`.

    ``dist_*`` hold the packed polar cones of the dictionaries, used for the
    optional per-step distances.
    """
    d = x.shape[0]
    K = kinds.shape[0]
    atom = np.empty(d)
    tmp = np.empty(d)
    zero = np.zeros(d)
    prev_sq = _dot(x, x)
    for n in range(idx.shape[0]):
        i = idx[n]
        coef, status = select_packed(kinds[i], mats[i], counts[i], scals[i], vecs[i], x, atom)
        if status != OK:
            return n, STOP_SOLVER, stag_count, INV_NONE
        for k in range(d):
            x[k] -= coef * atom[k]
        cur_sq = _dot(x, x)
        cur = np.sqrt(cur_sq)
        out_norm[n] = cur
        out_step[n] = abs(coef) * _norm(atom)
        out_coef[n] = coef
        for k in range(d):
            out_x[n, k] = x[k]
        if record_dist:
            for j in range(K):
                project_packed(dist_kinds[j], dist_mats[j], dist_counts[j], 0.0, zero, x, tmp)
                dd = 0.0
                for k in range(d):
                    dd += (x[k] - tmp[k]) ** 2
                out_dist[n, j] = np.sqrt(dd)
        if checked:
            if abs(cur_sq - prev_sq + out_step[n] ** 2) > PYTH_TOL:
                return n + 1, STOP_INVARIANT, stag_count, INV_PYTH
            if cur > np.sqrt(prev_sq) * (1.0 + MONOTONE_REL):
                return n + 1, STOP_INVARIANT, stag_count, INV_MONOTONE
            if coef != 0.0 and abs(_dot(x, atom)) > ORTH_TOL:
                return n + 1, STOP_INVARIANT, stag_count, INV_ORTHOGONAL
        prev_sq = cur_sq
        if cur <= norm_tol:
            return n + 1, STOP_NORM, stag_count, INV_NONE
        if stag_window > 0:
            if out_step[n] <= stag_eps:
                stag_count += 1
            else:
                stag_count = 0
            if stag_count >= stag_window:
                return n + 1, STOP_STAGNATION, stag_count, INV_NONE
    return idx.shape[0], RUNNING, stag_count, INV_NONE
