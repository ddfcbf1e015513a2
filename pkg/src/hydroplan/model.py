"""Translate a scenario into a sparse mixed-integer linear model.

Variable families (binary prefix y, continuous prefix x):

    yOp      plant on/off per (TF, t)
    yPSl     product selection per (TF, final product, t)
    xSUp/xSDn  start/stop transition markers per (TF, t), continuous in [0,1]
    xQ       inventory level per (TF, inventory kind, product, t)
    xSSupl   raw-water feed volume per (GW, TF, raw product, t)
    xDeCon   consumer delivery dispatch per (source, consumer, product, t)
    xBCV     buffer-capacity violation per (TF, RWI, raw product, t)
    xTVplus/xTVminus  target surplus/shortfall per (TF, TWI, product, t)
    xCDistb  horizon-total delivery volume per (source, consumer, product, vehicle)
    xVSSupl  horizon-total feed volume per (GW, TF, product, vehicle)
    xPDl     per-period delivery volume per (source, consumer, product, vehicle, t)
    xRw      per-period feed volume per (GW, TF, product, vehicle, t)
    xVQ      idle fleet capacity in kL per (region, vehicle, product, t)
    xVExQ    hired extra fleet capacity in kL per (region, vehicle, product)

Only index tuples passing the suitability guards are created; the constraint
builders then reference existing columns only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .scenario import RWI, TWI, Scenario

LE, GE, EQ = "<", ">", "="

INF = float("inf")


@dataclass(frozen=True)
class VarId:
    family: str
    index: tuple

    def name(self) -> str:
        parts = [self.family]
        for part in self.index:
            if isinstance(part, int):
                parts.append(f"t{part:03d}")
            else:
                parts.append(str(part))
        return "_".join(parts)


@dataclass
class BuildOptions:
    relax_psl: bool = True            # product-selection vars continuous in [0,1]
    hourly_fleet_balance: bool = True # include the hourly capacity recurrence
    penalize_target_surplus: bool = False  # also charge positive target deviation


class MilpModel:
    """Solver-agnostic sparse model: columns, rows, bounds, objective."""

    def __init__(self):
        self.var_ids: list[VarId] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.is_int: list[bool] = []
        self.obj: list[float] = []
        self._col_of: dict[VarId, int] = {}
        self._col_of_name: dict[str, int] = {}
        # rows stored as parallel lists
        self.row_cols: list[list[int]] = []
        self.row_vals: list[list[float]] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self.row_family: list[str] = []
        self.meta: dict = {"unservable": [], "var_counts": {}, "row_counts": {}}

    # -- columns -----------------------------------------------------------

    @property
    def ncols(self) -> int:
        return len(self.var_ids)

    @property
    def nrows(self) -> int:
        return len(self.sense)

    def add_var(self, vid: VarId, lb=0.0, ub=INF, integer=False) -> int:
        if vid in self._col_of:
            raise ValueError(f"duplicate variable {vid.name()}")
        col = len(self.var_ids)
        self.var_ids.append(vid)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.is_int.append(bool(integer))
        self.obj.append(0.0)
        self._col_of[vid] = col
        self._col_of_name[vid.name()] = col
        counts = self.meta["var_counts"]
        counts[vid.family] = counts.get(vid.family, 0) + 1
        return col

    def col(self, family: str, *index) -> int:
        return self._col_of[VarId(family, tuple(index))]

    def col_opt(self, family: str, *index) -> int | None:
        return self._col_of.get(VarId(family, tuple(index)))

    def has(self, family: str, *index) -> bool:
        return VarId(family, tuple(index)) in self._col_of

    def col_by_name(self, name: str) -> int:
        return self._col_of_name[name]

    # -- rows --------------------------------------------------------------

    def add_row(self, coefs, sense: str, rhs: float, family: str) -> int:
        cols, vals = [], []
        acc: dict[int, float] = {}
        for c, v in coefs:
            acc[c] = acc.get(c, 0.0) + float(v)
        for c in acc:
            if c < 0 or c >= self.ncols:
                raise ValueError(f"row references unknown column {c}")
        for c, v in acc.items():
            cols.append(c)
            vals.append(v)
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.sense.append(sense)
        self.rhs.append(float(rhs))
        self.row_family.append(family)
        counts = self.meta["row_counts"]
        counts[family] = counts.get(family, 0) + 1
        return self.nrows - 1

    # -- stats and export --------------------------------------------------

    @property
    def n_binary(self) -> int:
        return sum(self.is_int)

    @property
    def n_continuous(self) -> int:
        return self.ncols - self.n_binary

    def matrix(self) -> sparse.csc_matrix:
        data, ri, ci = [], [], []
        for r, (cols, vals) in enumerate(zip(self.row_cols, self.row_vals)):
            for c, v in zip(cols, vals):
                ri.append(r)
                ci.append(c)
                data.append(v)
        return sparse.csc_matrix(
            (data, (ri, ci)), shape=(self.nrows, self.ncols))

    def to_lp(self):
        from .simplex import LpProblem
        return LpProblem(
            a=self.matrix(),
            sense=np.array(self.sense),
            rhs=np.array(self.rhs, dtype=float),
            lb=np.array(self.lb, dtype=float),
            ub=np.array(self.ub, dtype=float),
            c=np.array(self.obj, dtype=float),
        )


# ---------------------------------------------------------------------------
# link enumeration (suitability-guarded index sets)


@dataclass
class _Links:
    """Precomputed guarded index sets shared by the builders."""
    consumer_links: list = field(default_factory=list)   # (s, c, p)
    consumer_vehicles: dict = field(default_factory=dict)  # (s,c,p) -> [v]
    feed_links: list = field(default_factory=list)       # (g, tf, p)
    feed_vehicles: dict = field(default_factory=dict)    # (g,tf,p) -> [v]
    fleet_keys: list = field(default_factory=list)       # (r, v, p) with RVP=1


def _enumerate_links(sc: Scenario) -> _Links:
    ln = _Links()
    finals = sc.final_products()
    raws = sc.raw_products()
    for s in sc.sources:
        for c in sc.consumers:
            if s.id not in c.sources:
                continue
            for p in finals:
                if not sc.sp(s.id, p):
                    continue
                vs = [v.id for v in sc.vehicles if sc.cpv(c.id, p, v.id)]
                if not vs:
                    continue
                ln.consumer_links.append((s.id, c.id, p))
                ln.consumer_vehicles[(s.id, c.id, p)] = vs
    for g in sc.sources:
        for tf_id in g.feeds:
            for p in raws:
                if not sc.sp(g.id, p):
                    continue
                vs = [v.id for v in sc.vehicles
                      if sc.sspv(g.id, tf_id, p, v.id)]
                if not vs:
                    continue
                ln.feed_links.append((g.id, tf_id, p))
                ln.feed_vehicles[(g.id, tf_id, p)] = vs
    for r in sc.regions:
        for v in sc.vehicles:
            for p in sc.products:
                if sc.rvp(r, v.id, p.id):
                    ln.fleet_keys.append((r, v.id, p.id))
    return ln


def _create_variables(sc: Scenario, m: MilpModel, opts: BuildOptions,
                      ln: _Links) -> None:
    nt = sc.horizon.nt
    for s in sc.treatment_plants():
        for t in range(1, nt + 1):
            ub = 0.0 if s.is_forced_off(t) else 1.0
            m.add_var(VarId("yOp", (s.id, t)), 0.0, ub, integer=True)
    for s in sc.treatment_plants():
        for t in range(1, nt + 1):
            m.add_var(VarId("xSUp", (s.id, t)), 0.0, 1.0)
            m.add_var(VarId("xSDn", (s.id, t)), 0.0, 1.0)
    for s in sc.treatment_plants():
        for p in sc.final_products():
            if not sc.sp(s.id, p):
                continue
            for t in range(1, nt + 1):
                m.add_var(VarId("yPSl", (s.id, p, t)), 0.0, 1.0,
                          integer=not opts.relax_psl)
    for s in sc.treatment_plants():
        for inv in sc.inventories_of(s.id):
            for p in inv.products:
                for t in range(1, nt + 1):
                    m.add_var(VarId("xQ", (s.id, inv.kind, p, t)))
                    if inv.kind == RWI:
                        m.add_var(VarId("xBCV", (s.id, inv.kind, p, t)))
                    elif inv.target_for(p, t) > 0:
                        m.add_var(VarId("xTVplus", (s.id, inv.kind, p, t)))
                        m.add_var(VarId("xTVminus", (s.id, inv.kind, p, t)))
    for (g, tf_id, p) in ln.feed_links:
        for t in range(1, nt + 1):
            m.add_var(VarId("xSSupl", (g, tf_id, p, t)))
    for (s, c, p) in ln.consumer_links:
        for t in range(1, nt + 1):
            m.add_var(VarId("xDeCon", (s, c, p, t)))
    for (s, c, p) in ln.consumer_links:
        for v in ln.consumer_vehicles[(s, c, p)]:
            m.add_var(VarId("xCDistb", (s, c, p, v)))
            for t in range(1, nt + 1):
                m.add_var(VarId("xPDl", (s, c, p, v, t)))
    for (g, tf_id, p) in ln.feed_links:
        for v in ln.feed_vehicles[(g, tf_id, p)]:
            m.add_var(VarId("xVSSupl", (g, tf_id, p, v)))
            for t in range(1, nt + 1):
                m.add_var(VarId("xRw", (g, tf_id, p, v, t)))
    for (r, v, p) in ln.fleet_keys:
        veh = sc.vehicle(v)
        ub = INF if veh.hire_allowed else 0.0
        m.add_var(VarId("xVExQ", (r, v, p)), 0.0, ub)
        if opts.hourly_fleet_balance:
            for t in range(1, nt + 1):
                m.add_var(VarId("xVQ", (r, v, p, t)))


# ---------------------------------------------------------------------------
# constraint builders


def build_transition_constraints(sc: Scenario, m: MilpModel) -> int:
    """Start/stop transitions plus rolling min-uptime / min-downtime windows."""
    nt = sc.horizon.nt
    n0 = m.nrows
    for s in sc.treatment_plants():
        for t in range(1, nt + 1):
            coefs = [(m.col("xSUp", s.id, t), 1.0),
                     (m.col("xSDn", s.id, t), -1.0),
                     (m.col("yOp", s.id, t), -1.0)]
            if t == 1:
                m.add_row(coefs, EQ, -float(s.initial_on), "transition")
            else:
                coefs.append((m.col("yOp", s.id, t - 1), 1.0))
                m.add_row(coefs, EQ, 0.0, "transition")
        for t in range(1, nt + 1):
            lo = max(1, t - s.min_uptime + 1)
            coefs = [(m.col("xSUp", s.id, k), 1.0) for k in range(lo, t + 1)]
            coefs.append((m.col("yOp", s.id, t), -1.0))
            m.add_row(coefs, LE, 0.0, "min_uptime")
        for t in range(1, nt + 1):
            lo = max(1, t - s.min_downtime + 1)
            coefs = [(m.col("xSDn", s.id, k), 1.0) for k in range(lo, t + 1)]
            coefs.append((m.col("yOp", s.id, t), 1.0))
            m.add_row(coefs, LE, 1.0, "min_downtime")
    return m.nrows - n0


def build_product_selection(sc: Scenario, m: MilpModel) -> int:
    """One final product in production per operating hour."""
    nt = sc.horizon.nt
    n0 = m.nrows
    for s in sc.treatment_plants():
        prods = [p for p in sc.final_products() if sc.sp(s.id, p)]
        for t in range(1, nt + 1):
            coefs = [(m.col("yPSl", s.id, p, t), 1.0) for p in prods]
            coefs.append((m.col("yOp", s.id, t), -1.0))
            m.add_row(coefs, EQ, 0.0, "product_selection")
    return m.nrows - n0


def build_inventory_balances(sc: Scenario, m: MilpModel) -> int:
    """Raw- and treated-water inventory recurrences with transit lags."""
    nt = sc.horizon.nt
    n0 = m.nrows
    for s in sc.treatment_plants():
        finals = [p for p in sc.final_products() if sc.sp(s.id, p)]
        for inv in sc.inventories_of(s.id):
            for p in inv.products:
                m.add_row([(m.col("xQ", s.id, inv.kind, p, 1), 1.0)],
                          EQ, inv.initial_for(p), "inventory_initial")
                for t in range(2, nt + 1):
                    coefs = [(m.col("xQ", s.id, inv.kind, p, t), 1.0),
                             (m.col("xQ", s.id, inv.kind, p, t - 1), -1.0)]
                    if inv.kind == RWI:
                        for g in sc.sources:
                            if not sc.ss(g.id, s.id):
                                continue
                            td = t - sc.rw_transit(g.id, s.id, p)
                            col = (m.col_opt("xSSupl", g.id, s.id, p, td)
                                   if td >= 1 else None)
                            if col is not None:
                                coefs.append((col, -1.0))
                        for p2 in finals:
                            coefs.append((
                                m.col("yPSl", s.id, p2, t),
                                s.throughput / s.recovery_for(p2)))
                        m.add_row(coefs, EQ, 0.0, "rwi_balance")
                    else:
                        coefs.append((m.col("yPSl", s.id, p, t),
                                      -s.throughput))
                        for c in sc.consumers:
                            col = m.col_opt("xDeCon", s.id, c.id, p, t)
                            if col is not None:
                                coefs.append((col, 1.0))
                        m.add_row(coefs, EQ, 0.0, "twi_balance")
    return m.nrows - n0


def build_inventory_bounds(sc: Scenario, m: MilpModel) -> int:
    """Hard min/max storage rows plus soft buffer and target rows."""
    nt = sc.horizon.nt
    n0 = m.nrows
    for s in sc.treatment_plants():
        for inv in sc.inventories_of(s.id):
            for p in inv.products:
                hi = inv.cap_max_for(p)
                for t in range(1, nt + 1):
                    q = m.col("xQ", s.id, inv.kind, p, t)
                    m.add_row([(q, 1.0)], GE, inv.cap_min_for(p),
                              "inventory_min")
                    if hi < INF:
                        m.add_row([(q, 1.0)], LE, hi, "inventory_max")
                if inv.kind == RWI:
                    for t in range(1, nt + 1):
                        q = m.col("xQ", s.id, inv.kind, p, t)
                        bcv = m.col("xBCV", s.id, inv.kind, p, t)
                        m.add_row([(q, 1.0), (bcv, 1.0)], GE,
                                  inv.cap_buffer_for(p), "buffer")
                else:
                    for t in range(1, nt + 1):
                        tgt = inv.target_for(p, t)
                        if tgt <= 0:
                            continue
                        q = m.col("xQ", s.id, inv.kind, p, t)
                        m.add_row(
                            [(q, 1.0),
                             (m.col("xTVplus", s.id, inv.kind, p, t), -1.0),
                             (m.col("xTVminus", s.id, inv.kind, p, t), 1.0)],
                            EQ, tgt, "target")
    return m.nrows - n0


def build_extraction_limits(sc: Scenario, m: MilpModel) -> int:
    """Hourly groundwater extraction ceilings."""
    nt = sc.horizon.nt
    n0 = m.nrows
    for g in sc.sources:
        if g.extraction_limit <= 0:
            continue
        for tf_id in g.feeds:
            for p in sc.raw_products():
                if not sc.sp(g.id, p):
                    continue
                for t in range(1, nt + 1):
                    col = m.col_opt("xSSupl", g.id, tf_id, p, t)
                    if col is not None:
                        m.add_row([(col, 1.0)], LE, g.extraction_limit,
                                  "extraction")
    return m.nrows - n0


def build_demand_constraints(sc: Scenario, m: MilpModel) -> int:
    """Window fulfillment: transit-shifted dispatch totals vs demand bounds.

    Structurally unservable (consumer, product, period) triples are recorded
    in model metadata instead of emitting an empty (infeasible) row.
    """
    n0 = m.nrows
    for c in sc.consumers:
        for p, t, lo, hi in c.demand:
            coefs = []
            for s in sc.sources:
                if not (sc.sp(s.id, p) and s.id in c.sources):
                    continue
                td = t - sc.transit(s.id, c.id, p)
                if td < 1:
                    continue
                col = m.col_opt("xDeCon", s.id, c.id, p, td)
                if col is not None:
                    coefs.append((col, 1.0))
            if not coefs:
                if lo > 0:
                    m.meta["unservable"].append((c.id, p, t))
                continue
            if lo > 0:
                m.add_row(coefs, GE, lo, "demand_min")
            if hi > 0:
                m.add_row(coefs, LE, hi, "demand_max")
    return m.nrows - n0


def build_fleet_constraints(sc: Scenario, m: MilpModel,
                            hourly: bool = True) -> int:
    """Fleet linking, aggregate time-capacity and hourly capacity recurrence."""
    nt = sc.horizon.nt
    n0 = m.nrows
    ln: _Links = m.meta["links"]

    # horizon-total linking of dispatches to per-vehicle volumes
    for (s, c, p) in ln.consumer_links:
        coefs = [(m.col("xDeCon", s, c, p, t), 1.0) for t in range(1, nt + 1)]
        for v in ln.consumer_vehicles[(s, c, p)]:
            coefs.append((m.col("xCDistb", s, c, p, v), -1.0))
        m.add_row(coefs, EQ, 0.0, "link_total_consumer")
    for (g, tf_id, p) in ln.feed_links:
        coefs = [(m.col("xSSupl", g, tf_id, p, t), 1.0)
                 for t in range(1, nt + 1)]
        for v in ln.feed_vehicles[(g, tf_id, p)]:
            coefs.append((m.col("xVSSupl", g, tf_id, p, v), -1.0))
        m.add_row(coefs, EQ, 0.0, "link_total_feed")

    # regional aggregate time-capacity balance
    for (r, v, p) in ln.fleet_keys:
        veh = sc.vehicle(v)
        coefs = []
        for (s, c, p2) in ln.consumer_links:
            if p2 != p or sc.source(s).region != r:
                continue
            if v not in ln.consumer_vehicles[(s, c, p)]:
                continue
            rtt = sc.rtt_consumer(s, c, p, v)
            coefs.append((m.col("xCDistb", s, c, p, v), rtt / veh.capacity))
        for (g, tf_id, p2) in ln.feed_links:
            if p2 != p or sc.source(g).region != r:
                continue
            if v not in ln.feed_vehicles[(g, tf_id, p)]:
                continue
            rtt = sc.rtt_feed(g, tf_id, p, v)
            coefs.append((m.col("xVSSupl", g, tf_id, p, v),
                          rtt / veh.capacity))
        coefs.append((m.col("xVExQ", r, v, p), -nt / veh.capacity))
        m.add_row(coefs, LE, nt * veh.availability_for(r, p),
                  "aggregate_capacity")

    # hourly disaggregation of dispatch volumes per vehicle class
    for (s, c, p) in ln.consumer_links:
        vs = ln.consumer_vehicles[(s, c, p)]
        for t in range(1, nt + 1):
            coefs = [(m.col("xPDl", s, c, p, v, t), 1.0) for v in vs]
            coefs.append((m.col("xDeCon", s, c, p, t), -1.0))
            m.add_row(coefs, EQ, 0.0, "link_hourly_consumer")
        for v in vs:
            coefs = [(m.col("xPDl", s, c, p, v, t), 1.0)
                     for t in range(1, nt + 1)]
            coefs.append((m.col("xCDistb", s, c, p, v), -1.0))
            m.add_row(coefs, EQ, 0.0, "link_vehicle_consumer")
    for (g, tf_id, p) in ln.feed_links:
        vs = ln.feed_vehicles[(g, tf_id, p)]
        for t in range(1, nt + 1):
            coefs = [(m.col("xRw", g, tf_id, p, v, t), 1.0) for v in vs]
            coefs.append((m.col("xSSupl", g, tf_id, p, t), -1.0))
            m.add_row(coefs, EQ, 0.0, "link_hourly_feed")
        for v in vs:
            coefs = [(m.col("xRw", g, tf_id, p, v, t), 1.0)
                     for t in range(1, nt + 1)]
            coefs.append((m.col("xVSSupl", g, tf_id, p, v), -1.0))
            m.add_row(coefs, EQ, 0.0, "link_vehicle_feed")

    if not hourly:
        return m.nrows - n0

    # hourly capacity recurrence: capacity leaves at dispatch, returns after
    # the (rounded-up) round trip; idle capacity xVQ >= 0 by variable bound
    for (r, v, p) in ln.fleet_keys:
        veh = sc.vehicle(v)
        out_links = [(s, c) for (s, c, p2) in ln.consumer_links
                     if p2 == p and sc.source(s).region == r
                     and v in ln.consumer_vehicles[(s, c, p)]]
        feed_out = [(g, tf_id) for (g, tf_id, p2) in ln.feed_links
                    if p2 == p and sc.source(g).region == r
                    and v in ln.feed_vehicles[(g, tf_id, p)]]
        for t in range(1, nt + 1):
            coefs = [(m.col("xVQ", r, v, p, t), 1.0)]
            for (s, c) in out_links:
                coefs.append((m.col("xPDl", s, c, p, v, t), 1.0))
                tr = t - sc.rtt_consumer(s, c, p, v)
                if tr >= 1:
                    coefs.append((m.col("xPDl", s, c, p, v, tr), -1.0))
            for (g, tf_id) in feed_out:
                coefs.append((m.col("xRw", g, tf_id, p, v, t), 1.0))
                tr = t - sc.rtt_feed(g, tf_id, p, v)
                if tr >= 1:
                    coefs.append((m.col("xRw", g, tf_id, p, v, tr), -1.0))
            if t == 1:
                coefs.append((m.col("xVExQ", r, v, p), -1.0))
                m.add_row(coefs, EQ,
                          veh.capacity * veh.availability_for(r, p),
                          "hourly_capacity")
            else:
                coefs.append((m.col("xVQ", r, v, p, t - 1), -1.0))
                m.add_row(coefs, EQ, 0.0, "hourly_capacity")
    return m.nrows - n0


def build_objective(sc: Scenario, m: MilpModel,
                    opts: BuildOptions | None = None) -> None:
    """Minimize transport costs plus violation and hiring penalties."""
    opts = opts or BuildOptions()
    ln: _Links = m.meta["links"]
    for (s, c, p) in ln.consumer_links:
        for v in ln.consumer_vehicles[(s, c, p)]:
            m.obj[m.col("xCDistb", s, c, p, v)] = \
                sc.costs.distribution_cost(s, c, v)
    for (g, tf_id, p) in ln.feed_links:
        for v in ln.feed_vehicles[(g, tf_id, p)]:
            m.obj[m.col("xVSSupl", g, tf_id, p, v)] = \
                sc.costs.raw_supply_cost(g, tf_id, v)
    for vid in m.var_ids:
        if vid.family == "xTVminus":
            s, _, p, _ = vid.index
            m.obj[m._col_of[vid]] = sc.costs.target_penalty(s, p)
        elif vid.family == "xTVplus" and opts.penalize_target_surplus:
            s, _, p, _ = vid.index
            m.obj[m._col_of[vid]] = sc.costs.target_penalty(s, p)
        elif vid.family == "xBCV":
            s, _, p, _ = vid.index
            m.obj[m._col_of[vid]] = sc.costs.buffer_penalty(s, p)
        elif vid.family == "xVExQ":
            r, v, p = vid.index
            veh = sc.vehicle(v)
            m.obj[m._col_of[vid]] = veh.hire_cost_for(p) / veh.capacity


def build(sc: Scenario, opts: BuildOptions | None = None) -> MilpModel:
    """Compose all builders into a complete model for the scenario."""
    opts = opts or BuildOptions()
    m = MilpModel()
    ln = _enumerate_links(sc)
    m.meta["links"] = ln
    _create_variables(sc, m, opts, ln)
    build_transition_constraints(sc, m)
    build_product_selection(sc, m)
    build_inventory_balances(sc, m)
    build_inventory_bounds(sc, m)
    build_extraction_limits(sc, m)
    build_demand_constraints(sc, m)
    build_fleet_constraints(sc, m, hourly=opts.hourly_fleet_balance)
    build_objective(sc, m, opts)
    m.meta["options"] = opts
    return m
