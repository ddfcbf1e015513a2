"""Problem-instance data model: parsing, validation and maintenance overrides.

A scenario bundles every input the planner needs: the hourly horizon, water
products, regions, sources (freshwater, groundwater, treatment facilities),
plant inventories, consumer clusters with timed demand windows, tanker vehicle
classes, link times and the cost table.  Scenarios are immutable once built;
``apply_override`` returns a modified copy.

The on-disk format is TOML; see docs/scenario_format.md for the field
reference.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

FW = "FW"
GW = "GW"
TF = "TF"
RWI = "RWI"
TWI = "TWI"

SOURCE_TYPES = (FW, GW, TF)
INVENTORY_KINDS = (RWI, TWI)


class ScenarioError(Exception):
    """Raised for malformed scenario files or bad cross-references."""


def _ceil_hours(hours: float) -> int:
    """Round a duration in rational hours up to whole periods.

    Rounding up is conservative: a delivery is never promised earlier than
    physically possible on the hourly grid.
    """
    n = math.ceil(hours - 1e-9)
    return max(int(n), 0)


@dataclass(frozen=True)
class Horizon:
    nt: int
    demand_start: int = 1

    def periods(self) -> range:
        return range(1, self.nt + 1)


@dataclass(frozen=True)
class Product:
    id: str
    kind: str  # "raw" | "final"


@dataclass(frozen=True)
class Source:
    id: str
    source_type: str  # FW | GW | TF
    region: str
    products: tuple[str, ...] = ()          # SP row: products this source supplies
    throughput: float = 0.0                 # kL/h, TF only
    extraction_limit: float = 0.0           # kL/h, GW only (0 = unlimited)
    min_uptime: int = 1                     # TF only
    min_downtime: int = 1                   # TF only
    initial_on: int = 0                     # TF only
    recovery: tuple[tuple[str, float], ...] = ()   # (final product, fraction)
    feeds: tuple[str, ...] = ()             # SS row: TF ids this source may feed
    forced_off: tuple[tuple[int, int], ...] = ()   # inclusive period windows

    def recovery_for(self, product: str) -> float:
        for p, beta in self.recovery:
            if p == product:
                return beta
        return 1.0

    def is_forced_off(self, t: int) -> bool:
        return any(a <= t <= b for a, b in self.forced_off)


@dataclass(frozen=True)
class Inventory:
    source: str
    kind: str  # RWI | TWI
    products: tuple[str, ...] = ()          # SIP row
    cap_min: tuple[tuple[str, float], ...] = ()
    cap_max: tuple[tuple[str, float], ...] = ()
    cap_buffer: tuple[tuple[str, float], ...] = ()
    initial: tuple[tuple[str, float], ...] = ()
    targets: tuple[tuple[str, int, float], ...] = ()  # (product, period, kL)

    def _get(self, table, product, default=0.0):
        for p, v in table:
            if p == product:
                return v
        return default

    def cap_min_for(self, p):
        return self._get(self.cap_min, p)

    def cap_max_for(self, p):
        return self._get(self.cap_max, p, math.inf)

    def cap_buffer_for(self, p):
        return self._get(self.cap_buffer, p)

    def initial_for(self, p):
        return self._get(self.initial, p)

    def target_for(self, p, t):
        for q, tt, v in self.targets:
            if q == p and tt == t:
                return v
        return 0.0


@dataclass(frozen=True)
class ConsumerCluster:
    id: str
    region: str
    ctype: str = ""                          # HHC/CC/HC, informational
    distribution_time: float = 1.0           # hours spent distributing on site
    sources: tuple[str, ...] = ()            # SC column: suitable supplying sources
    # demand windows expanded to per-period (product, period) -> (min, max) kL
    demand: tuple[tuple[str, int, float, float], ...] = ()

    def demand_map(self) -> dict[tuple[str, int], tuple[float, float]]:
        return {(p, t): (lo, hi) for p, t, lo, hi in self.demand}


@dataclass(frozen=True)
class VehicleClass:
    id: str
    capacity: float                          # kL
    products: tuple[str, ...] = ()           # products this class may carry
    availability: tuple[tuple[str, str, int], ...] = ()  # (region, product, count)
    hire_cost: tuple[tuple[str, float], ...] = ()        # per extra vehicle, per product
    consumers_excluded: tuple[str, ...] = () # clusters this class cannot reach
    hire_allowed: bool = True

    def availability_for(self, region: str, product: str) -> int:
        for r, p, n in self.availability:
            if r == region and p == product:
                return n
        return 0

    def hire_cost_for(self, product: str) -> float:
        for p, v in self.hire_cost:
            if p == product:
                return v
        return 0.0

    def carries(self, product: str) -> bool:
        return product in self.products

    def serves(self, consumer_id: str) -> bool:
        return consumer_id not in self.consumers_excluded


def _resolve(table: tuple[tuple[str, float], ...], keys: list[str],
             default: float) -> float:
    """Most-specific-key-wins lookup: ``keys`` ordered most to least specific."""
    mapping = dict(table)
    for k in keys:
        if k in mapping:
            return mapping[k]
    return mapping.get("default", default)


@dataclass(frozen=True)
class LinkTimes:
    """Travel/prep/disinfection times, keyed by link strings.

    Travel keys: ``"A->B"`` or vehicle-specific ``"A->B/V"``.
    Prep and disinfection keys: ``"S"`` or ``"S/V"``.  A ``default`` key
    supplies the fallback for each table.  All values are rational hours;
    derived transit and round-trip durations are rounded up to whole periods.
    """
    travel: tuple[tuple[str, float], ...] = ()
    prep: tuple[tuple[str, float], ...] = ()
    disinfection: tuple[tuple[str, float], ...] = ()

    def travel_hours(self, a: str, b: str, vehicle: str | None = None) -> float:
        keys = [f"{a}->{b}/{vehicle}"] if vehicle else []
        keys.append(f"{a}->{b}")
        return _resolve(self.travel, keys, 0.0)

    def prep_hours(self, s: str, vehicle: str | None = None) -> float:
        keys = [f"{s}/{vehicle}"] if vehicle else []
        keys.append(s)
        return _resolve(self.prep, keys, 0.0)

    def disinfection_hours(self, s: str, vehicle: str | None = None) -> float:
        keys = [f"{s}/{vehicle}"] if vehicle else []
        keys.append(s)
        return _resolve(self.disinfection, keys, 0.0)


@dataclass(frozen=True)
class CostTable:
    """Per-kL transport costs and per-kL violation penalties.

    Distribution / raw-supply keys: ``"A->B"`` or ``"A->B/V"``; violation
    penalty keys: ``"S"`` or ``"S/P"``.
    """
    distribution: tuple[tuple[str, float], ...] = ()
    raw_supply: tuple[tuple[str, float], ...] = ()
    target_violation: tuple[tuple[str, float], ...] = ()
    buffer_violation: tuple[tuple[str, float], ...] = ()

    def distribution_cost(self, s: str, c: str, vehicle: str) -> float:
        return _resolve(self.distribution, [f"{s}->{c}/{vehicle}", f"{s}->{c}"], 0.0)

    def raw_supply_cost(self, s: str, tf: str, vehicle: str) -> float:
        return _resolve(self.raw_supply, [f"{s}->{tf}/{vehicle}", f"{s}->{tf}"], 0.0)

    def target_penalty(self, s: str, p: str) -> float:
        return _resolve(self.target_violation, [f"{s}/{p}", s], 0.0)

    def buffer_penalty(self, s: str, p: str) -> float:
        return _resolve(self.buffer_violation, [f"{s}/{p}", s], 0.0)


@dataclass(frozen=True)
class MaintenanceOverride:
    source: str
    start: int
    end: int  # inclusive


@dataclass(frozen=True)
class Scenario:
    horizon: Horizon
    products: tuple[Product, ...]
    regions: tuple[str, ...]
    sources: tuple[Source, ...]
    inventories: tuple[Inventory, ...]
    consumers: tuple[ConsumerCluster, ...]
    vehicles: tuple[VehicleClass, ...]
    times: LinkTimes
    costs: CostTable

    # -- lookups ----------------------------------------------------------

    def product(self, pid: str) -> Product:
        for p in self.products:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def source(self, sid: str) -> Source:
        for s in self.sources:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def consumer(self, cid: str) -> ConsumerCluster:
        for c in self.consumers:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def vehicle(self, vid: str) -> VehicleClass:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def raw_products(self) -> list[str]:
        return [p.id for p in self.products if p.kind == "raw"]

    def final_products(self) -> list[str]:
        return [p.id for p in self.products if p.kind == "final"]

    def treatment_plants(self) -> list[Source]:
        return [s for s in self.sources if s.source_type == TF]

    def inventories_of(self, sid: str) -> list[Inventory]:
        return [i for i in self.inventories if i.source == sid]

    def inventory(self, sid: str, kind: str) -> Inventory | None:
        for i in self.inventories:
            if i.source == sid and i.kind == kind:
                return i
        return None

    # -- suitability ------------------------------------------------------

    def sc(self, s: str, c: str) -> bool:
        return s in self.consumer(c).sources

    def sp(self, s: str, p: str) -> bool:
        return p in self.source(s).products

    def ss(self, s: str, s2: str) -> bool:
        return s2 in self.source(s).feeds

    def cpv(self, c: str, p: str, v: str) -> bool:
        veh = self.vehicle(v)
        return veh.carries(p) and veh.serves(c)

    def sspv(self, s: str, s2: str, p: str, v: str) -> bool:
        return self.ss(s, s2) and self.vehicle(v).carries(p)

    def rvp(self, r: str, v: str, p: str) -> bool:
        return self.vehicle(v).carries(p)

    # -- derived integer-hour durations -----------------------------------

    def transit(self, s: str, c: str, p: str) -> int:
        """Dispatch-to-arrival lag for a consumer delivery, whole periods."""
        t = self.times
        return _ceil_hours(t.prep_hours(s) + t.disinfection_hours(s)
                           + t.travel_hours(s, c))

    def rw_transit(self, s: str, tf: str, p: str) -> int:
        """Dispatch-to-arrival lag for a raw-water feed, whole periods."""
        t = self.times
        return _ceil_hours(t.prep_hours(s) + t.travel_hours(s, tf))

    def rtt_consumer(self, s: str, c: str, p: str, v: str) -> int:
        """Round-trip periods for a consumer delivery by vehicle class v."""
        t = self.times
        hours = (2.0 * t.travel_hours(s, c, v) + t.prep_hours(s, v)
                 + t.disinfection_hours(s, v)
                 + self.consumer(c).distribution_time)
        return max(_ceil_hours(hours), 1)

    def rtt_feed(self, s: str, tf: str, p: str, v: str) -> int:
        """Round-trip periods for a raw-water feed by vehicle class v."""
        t = self.times
        hours = 2.0 * t.travel_hours(s, tf, v) + t.prep_hours(s, v)
        return max(_ceil_hours(hours), 1)


# ---------------------------------------------------------------------------
# parsing


def _pairs(d: dict) -> tuple:
    return tuple(sorted(d.items()))


def _req(table: dict, key: str, ctx: str):
    if key not in table:
        raise ScenarioError(f"{ctx}: missing required field '{key}'")
    return table[key]


def parse_scenario_text(text: str) -> Scenario:
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc}") from exc
    return _from_dict(raw)


def parse_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_scenario_text(data.decode("utf-8"))


def _from_dict(raw: dict) -> Scenario:
    hz = _req(raw, "horizon", "scenario")
    horizon = Horizon(nt=int(_req(hz, "nt", "[horizon]")),
                      demand_start=int(hz.get("demand_start", 1)))

    prods_tbl = _req(raw, "products", "scenario")
    products = tuple(
        [Product(pid, "raw") for pid in prods_tbl.get("raw", [])]
        + [Product(pid, "final") for pid in prods_tbl.get("final", [])]
    )
    _check_unique([p.id for p in products], "product")
    product_ids = {p.id for p in products}

    regions = tuple(raw.get("regions", {}).get("ids", []))
    _check_unique(regions, "region")

    sources = []
    for st in raw.get("sources", []):
        sid = _req(st, "id", "[[sources]]")
        stype = _req(st, "type", f"source {sid}")
        if stype not in SOURCE_TYPES:
            raise ScenarioError(f"source {sid}: unknown type '{stype}'")
        region = _req(st, "region", f"source {sid}")
        if region not in regions:
            raise ScenarioError(
                f"source {sid}: unknown entity reference: region '{region}'")
        for p in st.get("products", []):
            if p not in product_ids:
                raise ScenarioError(
                    f"source {sid}: unknown entity reference: product '{p}'")
        sources.append(Source(
            id=sid,
            source_type=stype,
            region=region,
            products=tuple(st.get("products", [])),
            throughput=float(st.get("throughput", 0.0)),
            extraction_limit=float(st.get("extraction_limit", 0.0)),
            min_uptime=int(st.get("min_uptime", 1)),
            min_downtime=int(st.get("min_downtime", 1)),
            initial_on=int(st.get("initial_on", 0)),
            recovery=_pairs(st.get("recovery", {})),
            feeds=tuple(st.get("feeds", [])),
            forced_off=tuple((int(a), int(b))
                             for a, b in st.get("forced_off", [])),
        ))
    _check_unique([s.id for s in sources], "source")
    source_ids = {s.id for s in sources}

    for s in sources:
        for tf in s.feeds:
            if tf not in source_ids:
                raise ScenarioError(
                    f"source {s.id}: unknown entity reference: feed '{tf}'")

    inventories = []
    for it in raw.get("inventories", []):
        sid = _req(it, "source", "[[inventories]]")
        if sid not in source_ids:
            raise ScenarioError(
                f"inventory: unknown entity reference: source '{sid}'")
        kind = _req(it, "kind", f"inventory at {sid}")
        if kind not in INVENTORY_KINDS:
            raise ScenarioError(f"inventory at {sid}: unknown kind '{kind}'")
        targets = tuple(sorted(
            (str(_req(tt, "product", "target")), int(_req(tt, "period", "target")),
             float(_req(tt, "amount", "target")))
            for tt in it.get("targets", [])))
        inventories.append(Inventory(
            source=sid,
            kind=kind,
            products=tuple(it.get("products", [])),
            cap_min=_pairs(it.get("cap_min", {})),
            cap_max=_pairs(it.get("cap_max", {})),
            cap_buffer=_pairs(it.get("cap_buffer", {})),
            initial=_pairs(it.get("initial", {})),
            targets=targets,
        ))

    consumers = []
    for ct in raw.get("consumers", []):
        cid = _req(ct, "id", "[[consumers]]")
        region = _req(ct, "region", f"consumer {cid}")
        if region not in regions:
            raise ScenarioError(
                f"consumer {cid}: unknown entity reference: region '{region}'")
        for sid in ct.get("sources", []):
            if sid not in source_ids:
                raise ScenarioError(
                    f"consumer {cid}: unknown entity reference: source '{sid}'")
        consumers.append(ConsumerCluster(
            id=cid,
            region=region,
            ctype=str(ct.get("type", "")),
            distribution_time=float(ct.get("distribution_time", 1.0)),
            sources=tuple(ct.get("sources", [])),
        ))
    _check_unique([c.id for c in consumers], "consumer")
    consumer_ids = {c.id for c in consumers}

    vehicles = []
    for vt in raw.get("vehicles", []):
        vid = _req(vt, "id", "[[vehicles]]")
        avail = []
        for r, per_p in vt.get("availability", {}).items():
            if r not in regions:
                raise ScenarioError(
                    f"vehicle {vid}: unknown entity reference: region '{r}'")
            for p, n in per_p.items():
                avail.append((r, p, int(n)))
        for c in vt.get("consumers_excluded", []):
            if c not in consumer_ids:
                raise ScenarioError(
                    f"vehicle {vid}: unknown entity reference: consumer '{c}'")
        vehicles.append(VehicleClass(
            id=vid,
            capacity=float(_req(vt, "capacity", f"vehicle {vid}")),
            products=tuple(vt.get("products", [])),
            availability=tuple(sorted(avail)),
            hire_cost=_pairs(vt.get("hire_cost", {})),
            consumers_excluded=tuple(vt.get("consumers_excluded", [])),
            hire_allowed=bool(vt.get("hire_allowed", True)),
        ))
    _check_unique([v.id for v in vehicles], "vehicle")

    tt = raw.get("times", {})
    times = LinkTimes(
        travel=_pairs(tt.get("travel", {})),
        prep=_pairs(tt.get("prep", {})),
        disinfection=_pairs(tt.get("disinfection", {})),
    )

    ctbl = raw.get("costs", {})
    costs = CostTable(
        distribution=_pairs(ctbl.get("distribution", {})),
        raw_supply=_pairs(ctbl.get("raw_supply", {})),
        target_violation=_pairs(ctbl.get("target_violation", {})),
        buffer_violation=_pairs(ctbl.get("buffer_violation", {})),
    )

    # demand entries: window form expanded to per-period equals-split
    demand_acc: dict[str, dict[tuple[str, int], list[float]]] = {
        c.id: {} for c in consumers}
    for dt in raw.get("demands", []):
        cid = _req(dt, "consumer", "[[demands]]")
        if cid not in consumer_ids:
            raise ScenarioError(
                f"demand: unknown entity reference: consumer '{cid}'")
        pid = _req(dt, "product", f"demand for {cid}")
        if pid not in product_ids:
            raise ScenarioError(
                f"demand for {cid}: unknown entity reference: product '{pid}'")
        acc = demand_acc[cid]
        if "period" in dt:
            t = int(dt["period"])
            lo = float(dt.get("min", 0.0))
            hi = float(dt.get("max", lo))
            _demand_add(acc, pid, t, lo, hi)
        else:
            day = int(_req(dt, "day", f"demand for {cid}"))
            h0, h1 = (int(x) for x in _req(dt, "window", f"demand for {cid}"))
            total = float(_req(dt, "total", f"demand for {cid}"))
            if h1 <= h0:
                raise ScenarioError(
                    f"demand for {cid}: empty window [{h0}, {h1})")
            per_hour = total / (h1 - h0)
            for h in range(h0, h1):
                t = (day - 1) * 24 + h + 1
                _demand_add(acc, pid, t, per_hour, per_hour)

    consumers = [
        replace(c, demand=tuple(sorted(
            (p, t, lo, hi) for (p, t), (lo, hi) in
            ((k, (v[0], v[1])) for k, v in demand_acc[c.id].items()))))
        for c in consumers
    ]

    # maintenance overrides recorded directly as forced-off windows
    scenario = Scenario(
        horizon=horizon,
        products=products,
        regions=regions,
        sources=tuple(sources),
        inventories=tuple(inventories),
        consumers=tuple(consumers),
        vehicles=tuple(vehicles),
        times=times,
        costs=costs,
    )
    for ot in raw.get("overrides", []):
        ov = MaintenanceOverride(
            source=str(_req(ot, "source", "[[overrides]]")),
            start=int(_req(ot, "from", "[[overrides]]")),
            end=int(_req(ot, "to", "[[overrides]]")),
        )
        scenario = apply_override(scenario, ov)
    return scenario


def _demand_add(acc, pid, t, lo, hi):
    cur = acc.get((pid, t))
    if cur is None:
        acc[(pid, t)] = [lo, hi]
    else:
        cur[0] += lo
        cur[1] += hi


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise ScenarioError(f"duplicate id: {what} '{i}'")
        seen.add(i)


# ---------------------------------------------------------------------------
# validation


def validate(scenario: Scenario) -> list[str]:
    """Check every structural invariant; returns violations (empty = valid)."""
    v: list[str] = []
    hz = scenario.horizon
    if hz.nt < 1:
        v.append(f"horizon: nt must be >= 1, got {hz.nt}")
    if not (1 <= hz.demand_start <= max(hz.nt, 1)):
        v.append(f"horizon: demand_start {hz.demand_start} outside [1, {hz.nt}]")

    final = set(scenario.final_products())
    rawp = set(scenario.raw_products())
    tf_ids = {s.id for s in scenario.treatment_plants()}

    for s in scenario.sources:
        if s.source_type == TF:
            if s.throughput <= 0:
                v.append(f"source {s.id}: TF requires throughput > 0")
            if s.min_uptime < 1 or s.min_downtime < 1:
                v.append(f"source {s.id}: min uptime/downtime must be >= 1")
            for p, beta in s.recovery:
                if not (0.0 < beta <= 1.0):
                    v.append(f"source {s.id}: recovery fraction for {p} "
                             f"must be in (0, 1], got {beta}")
            for p in s.products:
                if p not in final:
                    v.append(f"source {s.id}: TF may only supply final "
                             f"products, found '{p}'")
                if s.recovery_for(p) == 1.0 and not any(
                        q == p for q, _ in s.recovery):
                    v.append(f"warning: source {s.id}: recovery for {p} "
                             "unspecified, defaulting to 1.0 (lossless)")
        else:
            if s.throughput > 0:
                v.append(f"source {s.id}: throughput only valid on TF sources")
        if s.source_type == GW:
            for p in s.products:
                if p not in rawp:
                    v.append(f"source {s.id}: GW may only supply raw "
                             f"products, found '{p}'")
        if s.source_type == FW:
            if s.extraction_limit > 0:
                v.append(f"source {s.id}: extraction_limit only valid on GW")
            for p in s.products:
                if p not in final:
                    v.append(f"source {s.id}: FW may only supply final "
                             f"products, found '{p}'")
        for tf in s.feeds:
            if tf not in tf_ids:
                v.append(f"source {s.id}: feed target '{tf}' is not a TF")
        for a, b in s.forced_off:
            if a > b:
                continue
            if a < 1 or b > hz.nt:
                v.append(f"source {s.id}: forced-off window [{a}, {b}] "
                         f"outside horizon")

    for inv in scenario.inventories:
        src = scenario.source(inv.source)
        if src.source_type != TF:
            v.append(f"inventory at {inv.source}: owner must be a TF")
        want = rawp if inv.kind == RWI else final
        for p in inv.products:
            if p not in want:
                v.append(f"inventory {inv.kind} at {inv.source}: product "
                         f"'{p}' incompatible with kind")
        for p in inv.products:
            lo = inv.cap_min_for(p)
            hi = inv.cap_max_for(p)
            buf = inv.cap_buffer_for(p)
            q0 = inv.initial_for(p)
            if lo < 0:
                v.append(f"inventory {inv.kind} at {inv.source}: cap_min "
                         f"for {p} negative")
            if lo > hi:
                v.append(f"inventory {inv.kind} at {inv.source}: cap_min "
                         f"exceeds cap_max for {p}")
            if inv.kind == RWI and not (lo <= buf <= hi):
                v.append(f"inventory {inv.kind} at {inv.source}: buffer "
                         f"exceeds max capacity for {p}")
            if not (lo <= q0 <= hi):
                v.append(f"inventory {inv.kind} at {inv.source}: initial "
                         f"quantity for {p} outside [cap_min, cap_max]")
        if inv.kind == TWI and any(x > 0 for _, x in inv.cap_buffer):
            v.append(f"inventory TWI at {inv.source}: buffers only on RWI")
        if inv.kind == RWI and inv.targets:
            v.append(f"inventory RWI at {inv.source}: targets only on TWI")
        for p, t, amt in inv.targets:
            if not (1 <= t <= hz.nt):
                v.append(f"inventory {inv.kind} at {inv.source}: target "
                         f"period {t} outside horizon")

    for c in scenario.consumers:
        for p, t, lo, hi in c.demand:
            if p not in final:
                v.append(f"consumer {c.id}: demand for non-final product "
                         f"'{p}'")
                continue
            if lo < 0 or lo > hi:
                v.append(f"consumer {c.id}: demand bounds for ({p}, t={t}) "
                         f"must satisfy 0 <= min <= max")
            if not (1 <= t <= hz.nt):
                v.append(f"consumer {c.id}: demand period {t} outside horizon")
                continue
            if lo > 0:
                ok = any(
                    scenario.sp(s, p) and t - scenario.transit(s, c.id, p) >= 1
                    and any(scenario.cpv(c.id, p, veh.id)
                            for veh in scenario.vehicles)
                    for s in c.sources)
                if not ok:
                    v.append(f"consumer {c.id}: unservable demand for "
                             f"({p}, t={t}): no suitable source/vehicle "
                             "reaches it in time")

    for veh in scenario.vehicles:
        if veh.capacity <= 0:
            v.append(f"vehicle {veh.id}: capacity must be > 0")
        for r, p, n in veh.availability:
            if n < 0:
                v.append(f"vehicle {veh.id}: availability for ({r}, {p}) "
                         "negative")
            if p not in veh.products:
                v.append(f"vehicle {veh.id}: availability given for "
                         f"uncarried product '{p}'")

    for tf in scenario.treatment_plants():
        if scenario.inventory(tf.id, RWI) is not None:
            feeders = [s for s in scenario.sources if scenario.ss(s.id, tf.id)]
            if not feeders:
                v.append(f"source {tf.id}: RWI present but no groundwater "
                         "feeder declared")
    return v


# ---------------------------------------------------------------------------
# overrides


def apply_override(scenario: Scenario, ov: MaintenanceOverride) -> Scenario:
    """Return a scenario with a forced-off maintenance window on a TF."""
    src = scenario.source(ov.source)
    if src.source_type != TF:
        raise ScenarioError(
            f"override on {ov.source}: only TF sources can be forced off")
    if ov.end < ov.start:
        return scenario
    new_sources = tuple(
        replace(s, forced_off=tuple(sorted(
            set(s.forced_off) | {(ov.start, ov.end)})))
        if s.id == ov.source else s
        for s in scenario.sources)
    return replace(scenario, sources=new_sources)


# ---------------------------------------------------------------------------
# canonical serialization


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(type(v))


def _inline(pairs) -> str:
    return "{ " + ", ".join(f"{_fmt(k)} = {_fmt(v)}" for k, v in pairs) + " }"


def serialize(sc: Scenario) -> str:
    """Emit the canonical TOML form; parse(serialize(x)) == x."""
    out: list[str] = []
    w = out.append
    w("[horizon]")
    w(f"nt = {sc.horizon.nt}")
    w(f"demand_start = {sc.horizon.demand_start}")
    w("")
    w("[products]")
    w(f"raw = {_fmt(sc.raw_products())}")
    w(f"final = {_fmt(sc.final_products())}")
    w("")
    w("[regions]")
    w(f"ids = {_fmt(list(sc.regions))}")

    for s in sc.sources:
        w("")
        w("[[sources]]")
        w(f"id = {_fmt(s.id)}")
        w(f"type = {_fmt(s.source_type)}")
        w(f"region = {_fmt(s.region)}")
        w(f"products = {_fmt(list(s.products))}")
        if s.throughput:
            w(f"throughput = {_fmt(s.throughput)}")
        if s.extraction_limit:
            w(f"extraction_limit = {_fmt(s.extraction_limit)}")
        if s.source_type == TF:
            w(f"min_uptime = {s.min_uptime}")
            w(f"min_downtime = {s.min_downtime}")
            w(f"initial_on = {s.initial_on}")
        if s.recovery:
            w(f"recovery = {_inline(s.recovery)}")
        if s.feeds:
            w(f"feeds = {_fmt(list(s.feeds))}")
        if s.forced_off:
            w(f"forced_off = {_fmt([list(x) for x in s.forced_off])}")

    for inv in sc.inventories:
        w("")
        w("[[inventories]]")
        w(f"source = {_fmt(inv.source)}")
        w(f"kind = {_fmt(inv.kind)}")
        w(f"products = {_fmt(list(inv.products))}")
        for name in ("cap_min", "cap_max", "cap_buffer", "initial"):
            pairs = getattr(inv, name)
            if pairs:
                w(f"{name} = {_inline(pairs)}")
        for p, t, amt in inv.targets:
            w("")
            w("[[inventories.targets]]")
            w(f"product = {_fmt(p)}")
            w(f"period = {t}")
            w(f"amount = {_fmt(amt)}")

    for c in sc.consumers:
        w("")
        w("[[consumers]]")
        w(f"id = {_fmt(c.id)}")
        w(f"region = {_fmt(c.region)}")
        if c.ctype:
            w(f"type = {_fmt(c.ctype)}")
        w(f"distribution_time = {_fmt(c.distribution_time)}")
        w(f"sources = {_fmt(list(c.sources))}")

    for veh in sc.vehicles:
        w("")
        w("[[vehicles]]")
        w(f"id = {_fmt(veh.id)}")
        w(f"capacity = {_fmt(veh.capacity)}")
        w(f"products = {_fmt(list(veh.products))}")
        if veh.hire_cost:
            w(f"hire_cost = {_inline(veh.hire_cost)}")
        if not veh.hire_allowed:
            w("hire_allowed = false")
        if veh.consumers_excluded:
            w(f"consumers_excluded = {_fmt(list(veh.consumers_excluded))}")
        regions = sorted({r for r, _, _ in veh.availability})
        if regions:
            w("")
            w("[vehicles.availability]")
            for r in regions:
                pairs = [(p, n) for rr, p, n in veh.availability if rr == r]
                w(f"{r} = {_inline(pairs)}")

    for section, pairs in (("times.travel", sc.times.travel),
                           ("times.prep", sc.times.prep),
                           ("times.disinfection", sc.times.disinfection),
                           ("costs.distribution", sc.costs.distribution),
                           ("costs.raw_supply", sc.costs.raw_supply),
                           ("costs.target_violation", sc.costs.target_violation),
                           ("costs.buffer_violation", sc.costs.buffer_violation)):
        if pairs:
            w("")
            w(f"[{section}]")
            for k, val in pairs:
                w(f"{_fmt(k)} = {_fmt(val)}")

    for c in sc.consumers:
        for p, t, lo, hi in c.demand:
            w("")
            w("[[demands]]")
            w(f"consumer = {_fmt(c.id)}")
            w(f"product = {_fmt(p)}")
            w(f"period = {t}")
            w(f"min = {_fmt(lo)}")
            w(f"max = {_fmt(hi)}")
    w("")
    return "\n".join(out)
