"""Bounded-variable revised simplex.

Primal simplex over box-bounded columns (no standard-form expansion): rows are
augmented with one slack each, the basis is held as a sparse LU factorization
refreshed periodically, with product-form eta updates between refreshes.
Phase 1 drives basic bound violations to zero with the composite piecewise
cost; phase 2 prices with the true objective.  Dantzig pricing with a Bland
fallback after a long degenerate streak guarantees termination.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
BLAND_AFTER = 1000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
SINGULAR = "singular"


@dataclasses.dataclass
class LpProblem:
    a: sparse.csc_matrix           # m x n structural columns
    sense: np.ndarray              # '<' | '>' | '=' per row
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray                  # minimize

    def __post_init__(self):
        self.a = sparse.csc_matrix(self.a)
        self.sense = np.asarray(self.sense, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        bad = ~np.isin(self.sense, ("<", ">", "="))
        if bad.any():
            raise ValueError(f"unknown row sense {self.sense[bad][0]!r}")
        m, n = self.a.shape
        for name, arr, want in (("sense", self.sense, m),
                                ("rhs", self.rhs, m),
                                ("lb", self.lb, n),
                                ("ub", self.ub, n),
                                ("c", self.c, n)):
            if len(arr) != want:
                raise ValueError(
                    f"dimension mismatch: {name} has length {len(arr)}, "
                    f"expected {want}")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def nrows(self):
        return self.a.shape[0]

    @property
    def ncols(self):
        return self.a.shape[1]


@dataclasses.dataclass
class Basis:
    basic: np.ndarray        # m column indices into the augmented matrix
    at_upper: np.ndarray     # bool per augmented column (nonbasic side)


@dataclasses.dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    basis: Basis | None
    iterations: int

    @property
    def ok(self):
        return self.status == OPTIMAL


@dataclasses.dataclass
class FeasibilityReport:
    max_row_violation: float
    max_bound_violation: float
    worst_row: int
    worst_col: int

    @property
    def max_violation(self):
        return max(self.max_row_violation, self.max_bound_violation)


def feasibility_check(p: LpProblem, x: np.ndarray,
                      tol: float = FEAS_TOL) -> FeasibilityReport:
    """Independent certifier: per-row and per-bound maximum violations."""
    x = np.asarray(x, dtype=float)
    if len(x) != p.ncols:
        raise ValueError(
            f"dimension mismatch: x has length {len(x)}, expected {p.ncols}")
    ax = p.a @ x
    row_viol = np.zeros(p.nrows)
    le = p.sense == "<"
    ge = p.sense == ">"
    eq = p.sense == "="
    row_viol[le] = np.maximum(0.0, ax[le] - p.rhs[le])
    row_viol[ge] = np.maximum(0.0, p.rhs[ge] - ax[ge])
    row_viol[eq] = np.abs(ax[eq] - p.rhs[eq])
    bnd_viol = np.maximum(np.maximum(0.0, p.lb - x),
                          np.maximum(0.0, x - p.ub))
    worst_row = int(np.argmax(row_viol)) if p.nrows else -1
    worst_col = int(np.argmax(bnd_viol)) if p.ncols else -1
    return FeasibilityReport(
        max_row_violation=float(row_viol.max(initial=0.0)),
        max_bound_violation=float(bnd_viol.max(initial=0.0)),
        worst_row=worst_row,
        worst_col=worst_col,
    )


def dual_objective(p: LpProblem, sol: LpSolution) -> float:
    """Dual objective recovered from the optimal basis (for spot-checks)."""
    aug = _augment(p)
    f = _Factor(aug.acsc, sol.basis.basic)
    y = f.btran(aug.c[sol.basis.basic])
    d = aug.c - aug.at_mul(y)
    val = float(y @ aug.rhs)
    nonbasic = np.ones(aug.n, dtype=bool)
    nonbasic[sol.basis.basic] = False
    xfull = _nonbasic_values(aug, sol.basis.at_upper)
    val += float(d[nonbasic] @ xfull[nonbasic])
    return val


# ---------------------------------------------------------------------------
# internals


class _Augmented:
    """Structural columns plus one slack per row, with bounds per sense."""

    def __init__(self, p: LpProblem):
        m, n = p.a.shape
        eye = sparse.identity(m, format="csc")
        self.acsc = sparse.hstack([p.a, eye], format="csc")
        self.m = m
        self.n = n + m
        self.nstruct = n
        self.rhs = p.rhs.astype(float)
        self.c = np.concatenate([p.c.astype(float), np.zeros(m)])
        lb_s = np.zeros(m)
        ub_s = np.zeros(m)
        lb_s[p.sense == "<"] = 0.0
        ub_s[p.sense == "<"] = np.inf
        lb_s[p.sense == ">"] = -np.inf
        ub_s[p.sense == ">"] = 0.0
        self.lb = np.concatenate([p.lb.astype(float), lb_s])
        self.ub = np.concatenate([p.ub.astype(float), ub_s])
        self._at = self.acsc.T.tocsr()

    def col(self, j):
        a = self.acsc
        sl = slice(a.indptr[j], a.indptr[j + 1])
        return a.indices[sl], a.data[sl]

    def at_mul(self, y):
        return self._at @ y


def _augment(p: LpProblem) -> _Augmented:
    return _Augmented(p)


def _nonbasic_values(aug: _Augmented, at_upper: np.ndarray) -> np.ndarray:
    """Values every column takes when nonbasic (finite bound, else 0)."""
    x = np.where(at_upper, aug.ub, aug.lb)
    x[~np.isfinite(x)] = 0.0
    return x


class _Factor:
    """LU of the basis with product-form eta updates."""

    def __init__(self, acsc: sparse.csc_matrix, basic: np.ndarray):
        self.acsc = acsc
        self.basic = basic
        b = acsc[:, basic].tocsc()
        self.lu = sla.splu(b.tocsc(), permc_spec="COLAMD",
                           options={"SymmetricMode": False})
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        z = self.lu.solve(v)
        for r, w in self.etas:
            zr = z[r] / w[r]
            if zr != 0.0:
                z -= w * zr
            z[r] = zr
        return z

    def btran(self, v: np.ndarray) -> np.ndarray:
        u = v.astype(float).copy()
        for r, w in reversed(self.etas):
            ur = (u[r] - (w @ u - w[r] * u[r])) / w[r]
            u[r] = ur
        return self.lu.solve(u, trans="T")

    def update(self, r: int, w: np.ndarray):
        self.etas.append((r, w.copy()))


class _Simplex:
    def __init__(self, p: LpProblem, opts: dict):
        self.p = p
        self.aug = _Augmented(p)
        self.feas_tol = opts.get("feas_tol", FEAS_TOL)
        self.opt_tol = opts.get("opt_tol", OPT_TOL)
        self.max_iter = opts.get("max_iter", 0) or max(
            2000, 40 * (self.aug.m + self.aug.nstruct))
        self.refactor_every = opts.get("refactor_every", REFACTOR_EVERY)
        self.bland_after = opts.get("bland_after", BLAND_AFTER)
        self.iterations = 0
        self.degenerate_streak = 0
        self.factor: _Factor | None = None
        self.basic: np.ndarray | None = None
        self.in_basis: np.ndarray | None = None
        self.at_upper: np.ndarray | None = None
        self.xb: np.ndarray | None = None

    # -- basis bookkeeping -------------------------------------------------

    def slack_basis(self):
        aug = self.aug
        self.basic = np.arange(aug.nstruct, aug.n)
        self.at_upper = np.zeros(aug.n, dtype=bool)
        # start structurals at their finite bound nearest zero
        finite_ub = np.isfinite(aug.ub) & ~np.isfinite(aug.lb)
        self.at_upper[finite_ub] = True

    def try_warm(self, warm: Basis) -> bool:
        aug = self.aug
        if warm is None:
            return False
        basic = np.asarray(warm.basic)
        if len(basic) != aug.m or len(warm.at_upper) != aug.n:
            return False
        if np.any(basic < 0) or np.any(basic >= aug.n):
            return False
        if len(np.unique(basic)) != aug.m:
            return False
        self.basic = basic.copy()
        self.at_upper = np.asarray(warm.at_upper, dtype=bool).copy()
        return True

    def refactor(self) -> bool:
        try:
            self.factor = _Factor(self.aug.acsc, self.basic)
        except RuntimeError:
            return False
        self.in_basis = np.full(self.aug.n, -1)
        self.in_basis[self.basic] = np.arange(self.aug.m)
        self.recompute_xb()
        return True

    def recompute_xb(self):
        aug = self.aug
        xn = _nonbasic_values(aug, self.at_upper)
        xn[self.basic] = 0.0
        rhs_eff = aug.rhs - aug.acsc @ xn
        self.xb = self.factor.ftran(rhs_eff)

    def full_x(self) -> np.ndarray:
        x = _nonbasic_values(self.aug, self.at_upper)
        x[self.basic] = self.xb
        return x

    # -- iteration pieces --------------------------------------------------

    def infeasibilities(self):
        lo = self.aug.lb[self.basic]
        hi = self.aug.ub[self.basic]
        below = self.xb < lo - self.feas_tol
        above = self.xb > hi + self.feas_tol
        return below, above

    def price(self, phase1: bool, below, above):
        aug = self.aug
        if phase1:
            cb = np.zeros(aug.m)
            cb[below] = -1.0
            cb[above] = 1.0
            cn = np.zeros(aug.n)
        else:
            cb = aug.c[self.basic]
            cn = aug.c
        y = self.factor.btran(cb)
        d = cn - aug.at_mul(y)
        return d

    def choose_entering(self, d):
        aug = self.aug
        # fixed columns (lb == ub) can never usefully enter
        nonbasic = (self.in_basis < 0) & (aug.ub - aug.lb > 0)
        at_up = self.at_upper & nonbasic
        at_lo = nonbasic & ~self.at_upper
        # free nonbasic columns sit at value 0 and may move either way
        free = nonbasic & ~np.isfinite(aug.lb) & ~np.isfinite(aug.ub)
        score = np.zeros(aug.n)
        can_inc = (at_lo | free) & (d < -self.opt_tol)
        can_dec = (at_up | free) & (d > self.opt_tol)
        score[can_inc] = -d[can_inc]
        score[can_dec] = d[can_dec]
        if not score.any():
            return -1, 0
        if self.degenerate_streak > self.bland_after:
            q = int(np.flatnonzero(score > 0.0)[0])
        else:
            q = int(np.argmax(score))
        direction = 1 if can_inc[q] else -1
        return q, direction

    def ratio_test(self, q, direction, w, phase1, below, above):
        """Smallest step before a basic (or the entering column) hits a bound.

        Returns (t, leaving_pos, leave_at_upper); leaving_pos -2 means a bound
        flip of the entering column, -1 means unbounded.
        """
        aug = self.aug
        m = aug.m
        delta = direction * w          # rate each basic DECREASES per unit step
        lo = aug.lb[self.basic]
        hi = aug.ub[self.basic]
        t = np.full(m, np.inf)
        dn = delta > PIVOT_TOL         # basics moving down
        up = delta < -PIVOT_TOL        # basics moving up
        if phase1:
            # feasible basics block at their bounds; infeasible ones block
            # where they become feasible (no block moving further out)
            feas = ~(below | above)
            sel = dn & feas & np.isfinite(lo)
            t[sel] = (self.xb[sel] - lo[sel]) / delta[sel]
            sel = up & feas & np.isfinite(hi)
            t[sel] = (self.xb[sel] - hi[sel]) / delta[sel]
            sel = dn & above
            t[sel] = (self.xb[sel] - hi[sel]) / delta[sel]
            sel = up & below
            t[sel] = (self.xb[sel] - lo[sel]) / delta[sel]
        else:
            sel = dn & np.isfinite(lo)
            t[sel] = (self.xb[sel] - lo[sel]) / delta[sel]
            sel = up & np.isfinite(hi)
            t[sel] = (self.xb[sel] - hi[sel]) / delta[sel]
        t = np.maximum(t, 0.0)
        own = aug.ub[q] - aug.lb[q]    # entering bound-to-bound travel
        tmin = t.min() if m else np.inf
        if own <= tmin:
            if not np.isfinite(own):
                return np.inf, -1, False
            return own, -2, False
        if not np.isfinite(tmin):
            return np.inf, -1, False
        # among blockers at the minimum step prefer the largest |pivot|
        ties = np.flatnonzero(t <= tmin + 1e-12)
        r = int(ties[np.argmax(np.abs(delta[ties]))])
        # the leaving column sits at whichever bound it ran into
        if delta[r] > 0:   # moved down: upper bound only if it was above it
            leave_upper = bool(above[r]) if phase1 else False
        else:              # moved up: lower bound only if it was below it
            leave_upper = not (bool(below[r]) if phase1 else False)
        return float(t[r]), r, leave_upper

    def pivot(self, q, direction, w, t, r, leave_upper):
        aug = self.aug
        if t != 0.0:
            self.xb = self.xb - direction * t * w
        enter_from = (aug.ub[q] if self.at_upper[q] else aug.lb[q])
        if not np.isfinite(enter_from):
            enter_from = 0.0
        leaving = self.basic[r]
        self.basic[r] = q
        self.in_basis[leaving] = -1
        self.in_basis[q] = r
        self.at_upper[leaving] = leave_upper
        self.xb[r] = enter_from + direction * t
        self.factor.update(r, w)

    def bound_flip(self, q, direction, t, w):
        self.xb = self.xb - direction * t * w
        self.at_upper[q] = not self.at_upper[q]

    # -- driver ------------------------------------------------------------

    def run(self, warm: Basis | None) -> LpSolution:
        aug = self.aug
        if not self.try_warm(warm):
            self.slack_basis()
        if not self.refactor():
            self.slack_basis()
            if not self.refactor():
                return self._finish(SINGULAR)
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                return self._finish(ITERATION_LIMIT)
            if since_refactor >= self.refactor_every:
                if not self.refactor():
                    return self._finish(SINGULAR)
                since_refactor = 0
            below, above = self.infeasibilities()
            phase1 = bool(below.any() or above.any())
            d = self.price(phase1, below, above)
            q, direction = self.choose_entering(d)
            if q < 0:
                if phase1:
                    # confirm on a fresh factorization before declaring
                    if since_refactor > 0:
                        if not self.refactor():
                            return self._finish(SINGULAR)
                        since_refactor = 0
                        below, above = self.infeasibilities()
                        if not (below.any() or above.any()):
                            continue
                    return self._finish(INFEASIBLE)
                if since_refactor > 0:
                    # re-verify optimality after a clean refactorization
                    if not self.refactor():
                        return self._finish(SINGULAR)
                    since_refactor = 0
                    continue
                return self._finish(OPTIMAL)
            rows, vals = aug.col(q)
            aq = np.zeros(aug.m)
            aq[rows] = vals
            w = self.factor.ftran(aq)
            t, r, leave_upper = self.ratio_test(q, direction, w,
                                               phase1, below, above)
            self.iterations += 1
            since_refactor += 1
            if r == -1:
                if phase1:
                    return self._finish(INFEASIBLE)
                return self._finish(UNBOUNDED)
            if t <= 1e-12:
                self.degenerate_streak += 1
            else:
                self.degenerate_streak = 0
            if r == -2:
                self.bound_flip(q, direction, t, w)
                since_refactor -= 1   # no eta appended
            else:
                self.pivot(q, direction, w, t, r, leave_upper)

    def _finish(self, status: str) -> LpSolution:
        if self.basic is None or status == SINGULAR:
            return LpSolution(status, None, np.nan, None, self.iterations)
        xfull = self.full_x()
        x = xfull[:self.aug.nstruct]
        obj = float(self.p.c @ x)
        basis = Basis(self.basic.copy(), self.at_upper.copy())
        if status in (INFEASIBLE, UNBOUNDED, ITERATION_LIMIT):
            return LpSolution(status, x, obj, basis, self.iterations)
        return LpSolution(OPTIMAL, x, obj, basis, self.iterations)


def solve_lp(p: LpProblem, warm_basis: Basis | None = None,
             **opts) -> LpSolution:
    """Solve an LP; deterministic given identical inputs and options."""
    if p.nrows == 0:
        return _solve_unconstrained(p)
    return _Simplex(p, opts).run(warm_basis)


def _solve_unconstrained(p: LpProblem) -> LpSolution:
    x = np.where(p.c > 0, p.lb, np.where(p.c < 0, p.ub, 0.0))
    zero_cost = p.c == 0.0
    x[zero_cost] = np.clip(0.0, p.lb[zero_cost], p.ub[zero_cost])
    if not np.all(np.isfinite(x)):
        return LpSolution(UNBOUNDED, None, -np.inf, None, 0)
    basis = Basis(np.zeros(0, dtype=int), x == p.ub)
    return LpSolution(OPTIMAL, x, float(p.c @ x), basis, 0)
