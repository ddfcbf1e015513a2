"""MILP driver: branch-and-bound over simplex relaxations.

Best-bound-first node selection with depth-first plunging for early
incumbents; children warm-start from the parent basis.  A rounding heuristic
(fix all integer columns to the rounded relaxation values, repair with an LP)
supplies cheap incumbents; the relaxations of this model class are tight, so
bound-driven search converges quickly.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import MilpModel
from . import simplex
from .simplex import Basis, LpProblem, LpSolution, feasibility_check, solve_lp

OPTIMAL_WITHIN_GAP = "optimal-within-gap"
INFEASIBLE = "infeasible"
GAP_NOT_REACHED = "gap-not-reached"


@dataclass
class SolveOptions:
    gap_target: float = 0.001
    time_limit: float | None = None
    node_limit: int | None = None
    int_tol: float = 1e-6
    branching_rule: str = "most-fractional"
    deterministic: bool = True
    prune: bool = True                 # disable only for debugging/search audits
    heuristic_every: int = 1           # rounding heuristic every k nodes
    log: object = None                 # callable(str) for progress lines
    lp_options: dict = field(default_factory=dict)


@dataclass
class MilpResult:
    status: str
    x: np.ndarray | None
    objective: float
    best_bound: float
    nodes: int
    wall_time: float

    @property
    def gap(self) -> float:
        if self.x is None or not math.isfinite(self.objective):
            return math.inf
        return max(0.0, (self.objective - self.best_bound)
                   / max(abs(self.objective), 1.0))


def branch_select(x: np.ndarray, integer_cols: np.ndarray,
                  int_tol: float = 1e-6):
    """Most-fractional integer column, lowest index on ties; None if integral."""
    if len(integer_cols) == 0:
        return None
    vals = x[integer_cols]
    frac = np.abs(vals - np.round(vals))
    if frac.max(initial=0.0) <= int_tol:
        return None
    return int(integer_cols[int(np.argmax(frac))])


class _Node:
    __slots__ = ("bound", "seq", "fixes", "basis", "depth")

    def __init__(self, bound, seq, fixes, basis, depth):
        self.bound = bound
        self.seq = seq
        self.fixes = fixes      # dict col -> (lo, hi)
        self.basis = basis
        self.depth = depth

    def __lt__(self, other):
        return (self.bound, self.seq) < (other.bound, other.seq)


class _Search:
    def __init__(self, m: MilpModel, opts: SolveOptions):
        self.opts = opts
        self.lp = m.to_lp()
        self.int_cols = np.flatnonzero(np.array(m.is_int))
        self.base_lb = self.lp.lb.copy()
        self.base_ub = self.lp.ub.copy()
        self.incumbent: np.ndarray | None = None
        self.incumbent_obj = math.inf
        self.nodes = 0
        self.seq = 0
        self.heap: list[_Node] = []
        self.t0 = time.monotonic()
        self.rounded_seen: set = set()
        self.lp_iters = 0

    # -- plumbing ----------------------------------------------------------

    def elapsed(self):
        return time.monotonic() - self.t0

    def out_of_budget(self):
        o = self.opts
        if o.time_limit is not None and self.elapsed() > o.time_limit:
            return True
        if o.node_limit is not None and self.nodes >= o.node_limit:
            return True
        return False

    def solve_at(self, fixes: dict, warm: Basis | None) -> LpSolution:
        lb = self.base_lb.copy()
        ub = self.base_ub.copy()
        for col, (lo, hi) in fixes.items():
            lb[col] = max(lb[col], lo)
            ub[col] = min(ub[col], hi)
        p = LpProblem(self.lp.a, self.lp.sense, self.lp.rhs, lb, ub, self.lp.c)
        sol = solve_lp(p, warm_basis=warm, **self.opts.lp_options)
        if sol.status == simplex.ITERATION_LIMIT and warm is not None:
            sol = solve_lp(p, warm_basis=None, **self.opts.lp_options)
        self.lp_iters += sol.iterations
        return sol

    def rel_gap(self, bound):
        if self.incumbent is None:
            return math.inf
        return max(0.0, (self.incumbent_obj - bound)
                   / max(abs(self.incumbent_obj), 1.0))

    def global_bound(self, active_bound=None):
        candidates = [n.bound for n in self.heap]
        if active_bound is not None:
            candidates.append(active_bound)
        if not candidates:
            return self.incumbent_obj if self.incumbent is not None else -math.inf
        return min(candidates)

    def log_progress(self, active_bound=None):
        if self.opts.log is None:
            return
        bound = self.global_bound(active_bound)
        inc = self.incumbent_obj if self.incumbent is not None else math.inf
        gap = self.rel_gap(bound)
        gap_pct = gap * 100.0 if math.isfinite(gap) else math.inf
        self.opts.log(
            f"node={self.nodes} bound={bound:.6f} incumbent={inc:.6f} "
            f"gap={gap_pct:.4f}% t={self.elapsed():.2f}")

    # -- incumbents --------------------------------------------------------

    def offer_incumbent(self, sol: LpSolution):
        x = sol.x
        if x is None:
            return
        frac = np.abs(x[self.int_cols] - np.round(x[self.int_cols]))
        if frac.max(initial=0.0) > self.opts.int_tol:
            return
        if sol.objective >= self.incumbent_obj - 1e-12:
            return
        rep = feasibility_check(self.lp, x, tol=1e-6)
        if rep.max_violation > 1e-6:
            return
        self.incumbent = x.copy()
        self.incumbent_obj = float(sol.objective)

    def rounding_heuristic(self, sol: LpSolution, fixes: dict,
                           basis: Basis | None):
        if sol.x is None or len(self.int_cols) == 0:
            return
        rounded = np.round(sol.x[self.int_cols])
        rounded = np.clip(rounded, self.base_lb[self.int_cols],
                          self.base_ub[self.int_cols])
        key = rounded.tobytes()
        if key in self.rounded_seen:
            return
        self.rounded_seen.add(key)
        hfix = dict(fixes)
        for col, v in zip(self.int_cols, rounded):
            v = float(v)
            lo = max(self.base_lb[col], v)
            hi = min(self.base_ub[col], v)
            if lo > hi:
                return
            hfix[int(col)] = (v, v)
        hsol = self.solve_at(hfix, basis)
        if hsol.status == simplex.OPTIMAL:
            self.offer_incumbent(hsol)

    # -- main loop ---------------------------------------------------------

    def run(self) -> MilpResult:
        o = self.opts
        root = _Node(-math.inf, self._next_seq(), {}, None, 0)
        any_feasible_seen = False
        self.heap = []
        active: _Node | None = root
        while active is not None or self.heap:
            if self.out_of_budget():
                break
            if active is None:
                node = heapq.heappop(self.heap)
                # bound-based pruning of stale nodes
                if o.prune and self.rel_gap(node.bound) <= o.gap_target:
                    continue
            else:
                node = active
                active = None
            sol = self.solve_at(node.fixes, node.basis)
            self.nodes += 1
            if sol.status == simplex.INFEASIBLE:
                self.log_progress()
                continue
            if sol.status not in (simplex.OPTIMAL,):
                # numerically stuck node: keep searching siblings
                self.log_progress()
                continue
            any_feasible_seen = True
            bound = sol.objective
            if o.prune and self.rel_gap(bound) <= o.gap_target:
                self.log_progress(bound)
                continue
            col = branch_select(sol.x, self.int_cols, o.int_tol)
            if col is None:
                self.offer_incumbent(sol)
                self.log_progress(bound)
                continue
            if o.heuristic_every and self.nodes % o.heuristic_every == 0:
                self.rounding_heuristic(sol, node.fixes, sol.basis)
            frac = sol.x[col]
            down = dict(node.fixes)
            down[col] = (self.base_lb[col], math.floor(frac + o.int_tol))
            up = dict(node.fixes)
            up[col] = (math.ceil(frac - o.int_tol), self.base_ub[col])
            child_down = _Node(bound, self._next_seq(), down, sol.basis,
                               node.depth + 1)
            child_up = _Node(bound, self._next_seq(), up, sol.basis,
                             node.depth + 1)
            # plunge into the side the relaxation leans toward
            if frac - math.floor(frac) <= 0.5:
                active, pushed = child_down, child_up
            else:
                active, pushed = child_up, child_down
            heapq.heappush(self.heap, pushed)
            self.log_progress(bound)

        wall = self.elapsed()
        exhausted = active is None and not self.heap
        if self.incumbent is None:
            if exhausted and not self.out_of_budget():
                return MilpResult(INFEASIBLE, None, math.inf,
                                  math.inf if not any_feasible_seen else
                                  self.global_bound(), self.nodes, wall)
            return MilpResult(GAP_NOT_REACHED, None, math.inf,
                              self.global_bound(), self.nodes, wall)
        bound = self.global_bound()
        if exhausted:
            bound = self.incumbent_obj
        bound = min(bound, self.incumbent_obj)
        gap = max(0.0, (self.incumbent_obj - bound)
                  / max(abs(self.incumbent_obj), 1.0))
        status = (OPTIMAL_WITHIN_GAP if gap <= self.opts.gap_target
                  else GAP_NOT_REACHED)
        return MilpResult(status, self.incumbent, self.incumbent_obj,
                          bound, self.nodes, wall)

    def _next_seq(self):
        self.seq += 1
        return self.seq


def solve_milp(m: MilpModel, opts: SolveOptions | None = None) -> MilpResult:
    """Solve the model to the requested relative optimality gap."""
    opts = opts or SolveOptions()
    return _Search(m, opts).run()
