"""Homotopy continuation: start systems, path tracking, system solving.

The homotopy is H(w, t) = gamma * t * S(w) + (1 - t) * T(w) with t driven
from 1 to 0, S the start system, T the target, and gamma a random unit
scalar bounded away from the real axis (so the leading coefficient of the
start block never vanishes along the path).

Tracking is a fourth-order Runge-Kutta predictor on the implicit ODE
J_H dw/dt = -dH/dt followed by a Newton corrector at the new t, with
adaptive step halving/doubling.  Paths are independent, so the engine steps
a whole batch at once with per-path t and step size; per-path arithmetic is
identical regardless of how the batch is chunked, which is what makes
archives byte-identical under any thread count.

Solutions at infinity show up as diverging paths and are discarded; there is
no projective compactification and no endgame.  Endpoints whose Newton
refinement cannot certify the target residual are flagged ill-conditioned,
retried once with tightened steps, and quarantined if still bad.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonSquareSystem, NoConvergence, SingularJacobian
from .linalg import solve_linear
from .poly import Polynomial, PolySystem
from .rng import complex_gaussian, derive_rng, unit_complex

# Path statuses.
CONVERGED = "converged"
DIVERGED = "diverged"
STEP_FAILURE = "step_failure"
ILL_CONDITIONED = "ill_conditioned"

COND_LIMIT = 1e12  # Jacobian condition estimate above this flags an endpoint

# Per-thread sub-batch cap; keeps the power-table temporaries modest.
_CHUNK = 1024


@dataclass
class TrackSettings:
    """Knobs for the predictor-corrector loop."""

    step_init: float = 0.05
    step_min: float = 1e-10
    step_max: float = 0.2
    corrector_tol: float = 1e-8
    final_tol: float = 1e-11
    divergence_bound: float = 1e8
    max_steps: int = 1200
    corrector_iters: int = 3
    grow_streak: int = 4
    # stepping stops here and Newton against the target takes over; paths
    # with singular or infinite endpoints would otherwise crawl to t=0 in
    # endless halving cycles
    endgame_t: float = 1e-6
    # inside t < security_zone, a path past security_bound is growing like a
    # negative power of t and cannot come back: declare divergence early
    security_zone: float = 1e-3
    security_bound: float = 1e4

    def __post_init__(self):
        if not (0 < self.step_min <= self.step_init <= self.step_max <= 1.0):
            raise ValueError("need 0 < step_min <= step_init <= step_max <= 1")
        for name in ("corrector_tol", "final_tol", "divergence_bound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def tightened(self) -> "TrackSettings":
        """Variant used to retry flagged paths."""
        return replace(
            self,
            step_init=self.step_init / 10.0,
            step_max=self.step_max / 5.0,
            step_min=self.step_min / 100.0,
            corrector_tol=self.corrector_tol / 100.0,
            max_steps=self.max_steps * 2,
        )


@dataclass
class PathResult:
    """Outcome of one tracked path."""

    endpoint: np.ndarray
    status: str
    condition_estimate: float = 0.0
    winding_hint: int = 1
    path_index: int = -1
    residual: float = np.inf
    t_final: float = 1.0
    steps: int = 0


def points_match(x: np.ndarray, y: np.ndarray, tol: float = 1e-6) -> bool:
    """Coordinate-wise relative match used everywhere points are compared."""
    x = np.asarray(x)
    y = np.asarray(y)
    return bool(np.all(np.abs(x - y) <= tol * (1.0 + np.maximum(np.abs(x), np.abs(y)))))


# ---------------------------------------------------------------------------
# Start systems
# ---------------------------------------------------------------------------


def start_total_degree(target: PolySystem):
    """Start system {w_i^deg(f_i) - 1} plus all tuples of roots of unity."""
    n = target.nvars
    if len(target) != n:
        raise NonSquareSystem(f"{len(target)} equations in {n} variables")
    degrees = target.degrees()
    if any(d < 1 for d in degrees):
        raise NonSquareSystem("every equation must have positive degree")
    polys = []
    for i, d in enumerate(degrees):
        exps = [0] * n
        exps[i] = d
        polys.append(Polynomial({tuple(exps): 1.0, (0,) * n: -1.0}, n))
    roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in degrees]
    starts = np.array(list(itertools.product(*roots)), dtype=np.complex128)
    return PolySystem(polys), starts


class ProductStartSystem:
    """Multi-homogeneous start system kept in factored form.

    Equation i is the product, over variable groups g, of deg_ig random
    affine-linear forms in the group-g variables.  Start solutions pick one
    factor per equation such that each group contributes exactly as many
    linear conditions as it has variables.  Kept factored because expansion
    is both slow and unnecessary: the tracker only needs values and
    Jacobians, which prefix/suffix products deliver exactly.
    """

    def __init__(self, nvars, groups, factor_coeffs, factor_consts, eq_slices, count):
        self.nvars = nvars
        self.groups = groups
        self._a = factor_coeffs  # (F, n)
        self._b = factor_consts  # (F,)
        self._slices = eq_slices  # per-equation (start, end) into the form table
        self.path_count = count
        self.neqs = len(eq_slices)

    def evaluator(self):
        return self

    def values_and_jacobians(self, points: np.ndarray):
        pts = np.ascontiguousarray(points, dtype=np.complex128)
        bsz = pts.shape[0]
        ell = pts @ self._a.T + self._b  # (B, F)
        vals = np.empty((bsz, self.neqs), dtype=np.complex128)
        jacs = np.zeros((bsz, self.neqs, self.nvars), dtype=np.complex128)
        for i, (s, e) in enumerate(self._slices):
            k = e - s
            block = ell[:, s:e]
            pref = np.ones((bsz, k), dtype=np.complex128)
            for j in range(1, k):
                pref[:, j] = pref[:, j - 1] * block[:, j - 1]
            suf = np.ones((bsz, k), dtype=np.complex128)
            for j in range(k - 2, -1, -1):
                suf[:, j] = suf[:, j + 1] * block[:, j + 1]
            vals[:, i] = pref[:, -1] * block[:, -1]
            for j in range(k):
                jacs[:, i, :] += (pref[:, j] * suf[:, j])[:, None] * self._a[s + j]
        return vals, jacs

    def to_polysystem(self) -> PolySystem:
        """Expanded form; only sensible for small test systems."""
        polys = []
        for s, e in self._slices:
            acc = Polynomial.constant(1.0, self.nvars)
            for f in range(s, e):
                form = Polynomial.constant(self._b[f], self.nvars)
                for v in np.flatnonzero(self._a[f]):
                    form = form + Polynomial.variable(int(v), self.nvars) * self._a[f, v]
                acc = acc * form
            polys.append(acc)
        return PolySystem(polys)


def multihom_count(target: PolySystem, groups) -> int:
    """Multi-homogeneous root count by direct assignment enumeration."""
    mdeg = target.multidegrees(groups)
    sizes = [len(g) for g in groups]
    neqs = len(mdeg)

    def rec(i, caps):
        if i == neqs:
            return 1 if all(c == 0 for c in caps) else 0
        # prune: remaining equations must fill remaining capacity exactly
        if sum(caps) != neqs - i:
            return 0
        total = 0
        for g, cap in enumerate(caps):
            d = mdeg[i][g]
            if d == 0 or cap == 0:
                continue
            caps[g] -= 1
            total += d * rec(i + 1, caps)
            caps[g] += 1
        return total

    return rec(0, list(sizes))


def start_multihom(target: PolySystem, groups, seed: int = 0):
    """Factored multi-homogeneous start system plus all start solutions."""
    n = target.nvars
    if len(target) != n:
        raise NonSquareSystem(f"{len(target)} equations in {n} variables")
    flat = sorted(v for g in groups for v in g)
    if flat != list(range(n)):
        raise NonSquareSystem("groups must partition the variables")
    mdeg = target.multidegrees(groups)
    rng = derive_rng(seed, "mhom-forms")

    factor_coeffs, factor_consts = [], []
    eq_slices = []
    # factor_index[i][g][j] -> row in the form table
    factor_index = []
    for i in range(len(mdeg)):
        start = len(factor_coeffs)
        per_group = []
        for g, gvars in enumerate(groups):
            rows = []
            for _ in range(mdeg[i][g]):
                a = np.zeros(n, dtype=np.complex128)
                a[gvars] = complex_gaussian(rng, len(gvars))
                rows.append(len(factor_coeffs))
                factor_coeffs.append(a)
                factor_consts.append(complex(complex_gaussian(rng, ())))
            per_group.append(rows)
        factor_index.append(per_group)
        eq_slices.append((start, len(factor_coeffs)))

    a_all = np.array(factor_coeffs, dtype=np.complex128)
    b_all = np.array(factor_consts, dtype=np.complex128)

    sizes = [len(g) for g in groups]
    neqs = len(mdeg)
    assignments = []

    def rec(i, caps, chosen):
        if i == neqs:
            assignments.append(tuple(chosen))
            return
        if sum(caps) != neqs - i:
            return
        for g in range(len(groups)):
            if caps[g] == 0 or mdeg[i][g] == 0:
                continue
            caps[g] -= 1
            chosen.append(g)
            rec(i + 1, caps, chosen)
            chosen.pop()
            caps[g] += 1

    rec(0, list(sizes), [])

    starts = []
    for assign in assignments:
        choice_lists = [factor_index[i][assign[i]] for i in range(neqs)]
        for combo in itertools.product(*choice_lists):
            point = np.zeros(n, dtype=np.complex128)
            ok = True
            for g, gvars in enumerate(groups):
                rows = [combo[i] for i in range(neqs) if assign[i] == g]
                mat = a_all[np.array(rows)][:, gvars]
                rhs = -b_all[np.array(rows)]
                try:
                    point[gvars] = solve_linear(mat, rhs)
                except Exception:
                    ok = False
                    break
            if ok:
                starts.append(point)
    starts = (
        np.array(starts, dtype=np.complex128)
        if starts
        else np.zeros((0, n), dtype=np.complex128)
    )
    system = ProductStartSystem(n, groups, a_all, b_all, eq_slices, len(starts))
    return system, starts


# ---------------------------------------------------------------------------
# Homotopies
# ---------------------------------------------------------------------------


@dataclass
class Homotopy:
    """Linear homotopy gamma*t*start + (1-t)*target."""

    start: object  # PolySystem or anything with .evaluator()
    target: object
    gamma: complex

    def engine(self) -> "_LinearEngine":
        return _LinearEngine(self.start, self.target, self.gamma)


class _LinearEngine:
    """Evaluates H, J_H and dH/dt; start and target share one monomial table
    whenever both sides are plain polynomial systems (one power-table build
    per evaluation instead of two)."""

    def __init__(self, start, target, gamma):
        self.gamma = gamma
        self._joint = None
        if isinstance(start, PolySystem) and isinstance(target, PolySystem):
            self._m = len(start)
            from .poly import SystemEvaluator

            self._joint = SystemEvaluator(
                list(start.polys) + list(target.polys), start.nvars
            )
            self.t = target.evaluator()
        else:
            self.s = start.evaluator()
            self.t = target.evaluator()

    def eval(self, points: np.ndarray, t: np.ndarray):
        """H, J_H, dH/dt for a batch; t is per-path."""
        if self._joint is not None:
            m = self._m
            vals, jacs = self._joint.values_and_jacobians(points)
            vs, vt = vals[:, :m], vals[:, m:]
            js, jt = jacs[:, :m, :], jacs[:, m:, :]
        else:
            vs, js = self.s.values_and_jacobians(points)
            vt, jt = self.t.values_and_jacobians(points)
        gt = (self.gamma * t)[:, None]
        omt = (1.0 - t)[:, None]
        hv = gt * vs + omt * vt
        ht = self.gamma * vs - vt
        hj = gt[:, :, None] * js + omt[:, :, None] * jt
        return hv, hj, ht

    def target_values_and_jacobians(self, points: np.ndarray):
        return self.t.values_and_jacobians(points)


class SlicedEngine:
    """Homotopy that moves affine slice rows over a fixed polynomial block.

    Rows are [c(t)*R(w); gamma*t*L0(w) + (1-t)*L1(w)] with c(t) = gamma*t +
    (1-t).  Scaling an equation never changes its zero set, so every point on
    the path satisfies R = 0 and the interpolated slice; this is the engine
    behind witness moves, monodromy loops, membership tests and sampling.
    """

    def __init__(self, block, a0, b0, a1, b1, gamma):
        self.block_eval = block.evaluator()
        self.a0 = np.asarray(a0, dtype=np.complex128)
        self.b0 = np.asarray(b0, dtype=np.complex128)
        self.a1 = np.asarray(a1, dtype=np.complex128)
        self.b1 = np.asarray(b1, dtype=np.complex128)
        self.gamma = gamma

    def eval(self, points: np.ndarray, t: np.ndarray):
        vr, jr = self.block_eval.values_and_jacobians(points)
        l0 = points @ self.a0.T + self.b0
        l1 = points @ self.a1.T + self.b1
        gt = (self.gamma * t)[:, None]
        omt = (1.0 - t)[:, None]
        c = gt + omt
        hv = np.concatenate([c * vr, gt * l0 + omt * l1], axis=1)
        ht = np.concatenate(
            [(self.gamma - 1.0) * vr, self.gamma * l0 - l1], axis=1
        )
        slice_jac = gt[:, :, None] * self.a0 + omt[:, :, None] * self.a1
        hj = np.concatenate([c[:, :, None] * jr, slice_jac], axis=1)
        return hv, hj, ht

    def target_values_and_jacobians(self, points: np.ndarray):
        vr, jr = self.block_eval.values_and_jacobians(points)
        l1 = points @ self.a1.T + self.b1
        vals = np.concatenate([vr, l1], axis=1)
        bsz = points.shape[0]
        jacs = np.concatenate(
            [jr, np.broadcast_to(self.a1, (bsz,) + self.a1.shape)], axis=1
        )
        return vals, jacs


# ---------------------------------------------------------------------------
# The batched stepping core
# ---------------------------------------------------------------------------


def _batched_solve(jacs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve per-path linear systems; exact singularity yields NaN rows."""
    try:
        return np.linalg.solve(jacs, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for i in range(jacs.shape[0]):
            try:
                out[i] = np.linalg.solve(jacs[i], rhs[i])
            except np.linalg.LinAlgError:
                out[i] = np.nan
        return out


def _finite_rows(arr: np.ndarray) -> np.ndarray:
    return np.isfinite(arr).all(axis=tuple(range(1, arr.ndim)))


def _track_chunk(engine, starts: np.ndarray, s: TrackSettings):
    """Track one batch of paths from t=1 to t=0. Returns state arrays."""
    bsz, n = starts.shape
    w = starts.astype(np.complex128, copy=True)
    t = np.ones(bsz)
    h = np.full(bsz, s.step_init)
    steps = np.zeros(bsz, dtype=np.int64)
    streak = np.zeros(bsz, dtype=np.int64)
    status = np.full(bsz, "", dtype=object)
    live = np.ones(bsz, dtype=bool)
    k1 = np.full((bsz, n), np.nan, dtype=np.complex128)  # cached dw/dt at (w, t)

    def phi(pts, tv):
        _, hj, ht = engine.eval(pts, tv)
        return _batched_solve(hj, -ht)

    t_stop = s.endgame_t
    with np.errstate(all="ignore"):
        while True:
            idx = np.flatnonzero(live & (t - t_stop > s.step_min))
            if idx.size == 0:
                break
            wi, ti = w[idx], t[idx]
            # never step across the endgame boundary
            hi = np.minimum(h[idx], ti - t_stop)

            need = ~_finite_rows(k1[idx])
            if need.any():
                sub = idx[need]
                k1[sub] = phi(w[sub], t[sub])
            k1i = k1[idx]

            half = 0.5 * hi
            k2 = phi(wi - half[:, None] * k1i, ti - half)
            k3 = phi(wi - half[:, None] * k2, ti - half)
            k4 = phi(wi - hi[:, None] * k3, ti - hi)
            wp = wi - (hi / 6.0)[:, None] * (k1i + 2.0 * k2 + 2.0 * k3 + k4)
            tn = ti - hi

            # Newton corrector at t = tn; the final evaluation is cached as
            # the next step's k1 so an accepted step costs no extra stage.
            wc = wp.copy()
            ok = np.zeros(idx.size, dtype=bool)
            hopeless = np.zeros(idx.size, dtype=bool)
            new_k1 = np.full_like(k1i, np.nan)
            for _ in range(s.corrector_iters + 1):
                hv, hj, ht = engine.eval(wc, tn)
                res = np.max(np.abs(hv), axis=1)
                wnorm = np.max(np.abs(wc), axis=1)
                fin = np.isfinite(res)
                good = fin & (res <= s.corrector_tol * (1.0 + wnorm))
                # residual too large for a few Newton steps to fix: stop early
                hopeless |= ~fin | (res > 1e4 * (1.0 + wnorm))
                newly = good & ~ok
                if newly.any():
                    new_k1[newly] = _batched_solve(hj[newly], -ht[newly])
                ok |= good
                pending = ~ok & ~hopeless
                if not pending.any():
                    break
                delta = _batched_solve(hj[pending], -hv[pending])
                fd = _finite_rows(delta)
                upd = np.flatnonzero(pending)[fd]
                wc[upd] += delta[fd]

            ok &= _finite_rows(wc)
            acc = np.flatnonzero(ok)
            rej = np.flatnonzero(~ok)

            if acc.size:
                ga = idx[acc]
                w[ga] = wc[acc]
                t[ga] = tn[acc]
                k1[ga] = new_k1[acc]
                streak[ga] += 1
                grow = streak[ga] >= s.grow_streak
                if grow.any():
                    gg = ga[grow]
                    h[gg] = np.minimum(h[gg] * 2.0, s.step_max)
                    streak[gg] = 0
            if rej.size:
                gr = idx[rej]
                # a failure with the boundary already in reach will not be
                # fixed by smaller steps: hand the path to the refinement
                blocked = (ti[rej] - t_stop) <= 8.0 * t_stop
                if blocked.any():
                    live[gr[blocked]] = False
                # shrink from the step actually attempted (it may have been
                # clipped); wildly failed predictions shrink faster
                h[gr] = hi[rej] * np.where(hopeless[rej], 0.125, 0.5)
                streak[gr] = 0
                dead = (h[gr] < s.step_min) & ~blocked
                if dead.any():
                    gd = gr[dead]
                    status[gd] = STEP_FAILURE
                    live[gd] = False

            steps[idx] += 1
            overrun = live[idx] & (steps[idx] >= s.max_steps)
            if overrun.any():
                go = idx[overrun]
                status[go] = STEP_FAILURE
                live[go] = False
            norms = np.max(np.abs(w[idx]), axis=1)
            big = live[idx] & (
                (norms > s.divergence_bound)
                | ((t[idx] < s.security_zone) & (norms > s.security_bound))
            )
            if big.any():
                gb = idx[big]
                status[gb] = DIVERGED
                live[gb] = False

    return w, t, status, steps


# Newton refinement of a boundary point may move it at most this fraction of
# its scale; larger drift means the iteration wandered to a different
# solution (typical for paths heading to infinity) and proves nothing about
# this path's endpoint.
_ENDGAME_DRIFT = 0.05


def _refine_endpoints(engine, w, t, status, steps, s: TrackSettings):
    """Newton against the target for paths that reached the endgame
    boundary; certify residuals, estimate conditioning, classify."""
    bsz = w.shape[0]
    results = [None] * bsz
    done = np.flatnonzero(status == "")
    w_end = w[done].copy()
    anchor = w_end.copy()
    best = w_end.copy()
    best_res = np.full(done.size, np.inf)
    cond = np.zeros(done.size)
    with np.errstate(all="ignore"):
        for _ in range(12):
            if done.size == 0:
                break
            vals, jacs = engine.target_values_and_jacobians(w_end)
            res = np.max(np.abs(vals), axis=1)
            drift = np.max(np.abs(w_end - anchor), axis=1)
            scale = 1.0 + np.max(np.abs(anchor), axis=1)
            lost = ~np.isfinite(drift) | (drift > 4.0 * _ENDGAME_DRIFT * scale)
            improve = np.isfinite(res) & (res < best_res) & ~lost
            best[improve] = w_end[improve]
            best_res[improve] = res[improve]
            if lost.all():
                break
            delta = _batched_solve(jacs[~lost], -vals[~lost])
            fin = _finite_rows(delta)
            upd = np.flatnonzero(~lost)[fin]
            w_end[upd] += delta[fin]
        if done.size:
            vals, _ = engine.target_values_and_jacobians(w_end)
            res = np.max(np.abs(vals), axis=1)
            drift = np.max(np.abs(w_end - anchor), axis=1)
            scale = 1.0 + np.max(np.abs(anchor), axis=1)
            lost = ~np.isfinite(drift) | (drift > 4.0 * _ENDGAME_DRIFT * scale)
            improve = np.isfinite(res) & (res < best_res) & ~lost
            best[improve] = w_end[improve]
            best_res[improve] = res[improve]
            _, jacs = engine.target_values_and_jacobians(best)
            cond = np.linalg.cond(jacs)
            cond = np.where(np.isfinite(cond), cond, np.inf)

    for pos, i in enumerate(done):
        boundary = w[i]
        bnorm = float(np.max(np.abs(boundary)))
        drift = float(np.max(np.abs(best[pos] - boundary)))
        anchored = np.isfinite(drift) and drift <= _ENDGAME_DRIFT * (1.0 + bnorm)
        wnorm = float(np.max(np.abs(best[pos]))) if np.isfinite(best[pos]).all() else np.inf
        good_res = anchored and best_res[pos] <= s.final_tol * (1.0 + wnorm)
        good_cond = cond[pos] <= COND_LIMIT
        # a residual-certified endpoint with a singular Jacobian is a
        # candidate singular endpoint (typically a point on a higher-
        # dimensional solution set), not a regular solution
        results[i] = PathResult(
            endpoint=best[pos] if anchored else boundary,
            status=CONVERGED if (good_res and good_cond) else ILL_CONDITIONED,
            condition_estimate=float(cond[pos]),
            residual=float(best_res[pos]) if anchored else np.inf,
            t_final=float(t[i]),
            steps=int(steps[i]),
            path_index=i,
        )
    for i in np.flatnonzero(status != ""):
        results[i] = PathResult(
            endpoint=w[i],
            status=str(status[i]),
            residual=np.inf,
            t_final=float(t[i]),
            steps=int(steps[i]),
            path_index=i,
        )
    return results


def run_paths(engine, starts: np.ndarray, settings: TrackSettings, threads: int = 1):
    """Track every start point; results are ordered by start index.

    Chunking (and therefore threading) never changes per-path arithmetic,
    only scheduling, so outputs are identical for any thread count.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=np.complex128))
    total = starts.shape[0]
    if total == 0:
        return []
    chunks = [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]

    def work(bounds):
        lo, hi = bounds
        w, t, status, steps = _track_chunk(engine, starts[lo:hi], settings)
        res = _refine_endpoints(engine, w, t, status, steps, settings)
        for r in res:
            r.path_index += lo
        return lo, res

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = dict(pool.map(work, chunks))
    else:
        parts = dict(work(c) for c in chunks)
    out = []
    for lo, _hi in chunks:
        out.extend(parts[lo])
    return out


def track_path(start_sol, homotopy: Homotopy, settings: TrackSettings | None = None) -> PathResult:
    """Track a single path of a start->target homotopy."""
    settings = settings or TrackSettings()
    return run_paths(homotopy.engine(), np.asarray(start_sol)[None, :], settings)[0]


def newton_refine(point, system: PolySystem, tol: float = 1e-11, max_iter: int = 20) -> np.ndarray:
    """Polish a point near a regular zero of a square system.

    Raises SingularJacobian if a solve hits a tiny pivot and NoConvergence if
    the residual never drops below ``tol * (1 + |point|)``.
    """
    w = np.asarray(point, dtype=np.complex128).copy()
    if len(system) != system.nvars:
        raise NonSquareSystem("refinement needs a square system")
    ev = system.evaluator()
    for _ in range(max_iter):
        vals, jacs = ev.values_and_jacobians(w[None, :])
        res = float(np.max(np.abs(vals[0])))
        if res <= tol * (1.0 + float(np.max(np.abs(w)))):
            return w
        try:
            delta = solve_linear(jacs[0], -vals[0])
        except Exception as exc:
            raise SingularJacobian(f"singular Jacobian during refinement: {exc}") from exc
        w = w + delta
    vals = ev.values(w[None, :])
    res = float(np.max(np.abs(vals[0])))
    if res <= tol * (1.0 + float(np.max(np.abs(w)))):
        return w
    raise NoConvergence(f"residual {res:.3e} after {max_iter} Newton steps")


# ---------------------------------------------------------------------------
# Full solves
# ---------------------------------------------------------------------------


def choose_strategy(target: PolySystem, strategy: str, groups) -> str:
    """Resolve 'auto' to whichever start system has fewer paths."""
    if strategy in ("total", "multihom"):
        return strategy
    if strategy != "auto":
        raise ValueError(f"unknown strategy {strategy!r}")
    if not groups or len(groups) < 2:
        return "total"
    td = 1
    for d in target.degrees():
        td *= d
    return "multihom" if multihom_count(target, groups) < td else "total"


def solve_system(
    target: PolySystem,
    settings: TrackSettings | None = None,
    strategy: str = "auto",
    seed: int = 0,
    groups=None,
    threads: int = 1,
    dedup_tol: float = 1e-6,
):
    """Solve a square system from a fresh start system.

    Returns PathResults: first the distinct converged endpoints (one entry
    per solution, ``winding_hint`` counting the paths that landed there,
    ordered by first arrival), then the non-converged paths by index.
    Flagged paths are retried once with tightened settings before being
    reported.  Deterministic for a fixed seed, independent of ``threads``.
    """
    settings = settings or TrackSettings()
    n = target.nvars
    if len(target) != n:
        raise NonSquareSystem(f"{len(target)} equations in {n} variables")
    kind = choose_strategy(target, strategy, groups)
    if kind == "multihom":
        start_sys, starts = start_multihom(target, groups, seed=seed)
    else:
        start_sys, starts = start_total_degree(target)
    gamma = unit_complex(derive_rng(seed, "gamma"))
    engine = Homotopy(start_sys, target, gamma).engine()

    results = run_paths(engine, starts, settings, threads=threads)

    # Retry only flagged endpoints whose residual is NOT certified: a
    # certified-but-singular endpoint is geometric (a point on a positive-
    # dimensional set or a multiple root); retracking cannot regularize it.
    flagged = [
        r.path_index
        for r in results
        if r.status == ILL_CONDITIONED
        and not r.residual <= settings.final_tol * (1.0 + np.max(np.abs(r.endpoint)))
    ]
    if flagged:
        tight = settings.tightened()
        redo = run_paths(engine, starts[np.array(flagged)], tight, threads=threads)
        for k, r in zip(flagged, redo):
            r.path_index = k
            if r.status == CONVERGED or results[k].status != CONVERGED:
                results[k] = r

    return dedup_results(results, dedup_tol, merge_tol=settings.final_tol)


def dedup_results(results, dedup_tol: float = 1e-6, merge_tol: float = 1e-11):
    """Merge converged endpoints; distinct solutions first, failures after.

    A quarantined endpoint whose residual is still certified (a singular
    arrival at a genuine solution, e.g. one path of a double root) merges
    into the matching converged solution's multiplicity instead of being
    reported separately.
    """
    distinct: list[PathResult] = []
    reps = None
    failed: list[PathResult] = []

    def match_index(e):
        if reps is None:
            return -1
        close = np.abs(reps - e) <= dedup_tol * (1.0 + np.maximum(np.abs(reps), np.abs(e)))
        hit = np.flatnonzero(close.all(axis=1))
        return int(hit[0]) if hit.size else -1

    for r in results:
        if r.status != CONVERGED:
            failed.append(r)
            continue
        k = match_index(r.endpoint)
        if k >= 0:
            distinct[k].winding_hint += 1
            continue
        distinct.append(r)
        reps = r.endpoint[None, :] if reps is None else np.vstack([reps, r.endpoint])

    leftover = []
    for r in failed:
        certified = (
            r.status == ILL_CONDITIONED
            and np.isfinite(r.residual)
            and r.residual <= merge_tol * (1.0 + float(np.max(np.abs(r.endpoint))))
        )
        k = match_index(r.endpoint) if certified else -1
        if k >= 0:
            distinct[k].winding_hint += 1
        else:
            leftover.append(r)
    return distinct + leftover
