"""Hierarchical decomposition and scaling helpers.

The decomposition mirrors the two-phase scheme: solve each RAID-group
subsystem (its disks plus the interconnects wiring them to expanders)
for its own mean time to data loss, substitute every subsystem by a
2-state equivalent component failing at 1/MTTDIL, and solve the reduced
shared-component model. A three-level plan additionally reduces each
disk (with its interconnects) to an equivalent failure rate before the
group level. Whole-system measures of many totally-independent
subsystems can instead be scaled (mean/n), bounded by Riemann sums of a
discretized survival curve, or estimated by min-of-samples simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .builder import (
    CorrelationSpec,
    DiskModelSpec,
    NO_CORRELATION,
    RebuildSpec,
    SystemModel,
    build_system_ctmc,
)
from .ctmc import Ctmc, SolveOptions, StateBudgetExceeded, explore, mtta
from .simulate import SimOptions, simulate_mtta
from .topology import Topology

__all__ = [
    "DecompositionPlan",
    "DiscretizationParams",
    "LevelResult",
    "equivalent_component",
    "decompose_solve",
    "independent_scale",
    "discretized_mean",
    "estimate_p",
    "write_level_report",
]


def equivalent_component(mttdil_sub: float) -> float:
    """Failure rate of the 2-state equivalent of a solved subsystem."""
    if mttdil_sub == math.inf:
        return 0.0
    if not mttdil_sub > 0:
        raise ValueError("subsystem MTTDIL must be positive")
    return 1.0 / mttdil_sub


def independent_scale(mttdil_sub: float, n: int) -> float:
    """System MTTDIL of n totally independent copies: mttdil_sub / n.

    Exact when the subsystem lifetime is exponential; callers should
    check that first (ks_exponentiality on subsystem samples).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return mttdil_sub / n


@dataclass
class DecompositionPlan:
    """How to split the solve: 1 = direct, 2 = group/system, 3 = disk/group/system."""

    levels: int = 2
    method: str = "auto"  # numeric | simulate | auto
    state_budget: int = 200_000
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    sim_options: SimOptions = field(default_factory=SimOptions)

    def __post_init__(self):
        if self.levels not in (1, 2, 3):
            raise ValueError("levels must be 1, 2 or 3")
        if self.method not in ("numeric", "simulate", "auto"):
            raise ValueError("method must be numeric, simulate or auto")


@dataclass(frozen=True)
class LevelResult:
    level: int
    subsystem_id: str
    method: str
    value_hr: float
    ci_halfwidth: float
    states: int


def write_level_report(path, entries: list[LevelResult]) -> None:
    with open(path, "w") as fh:
        fh.write("level,subsystem_id,method,value_hr,ci_halfwidth\n")
        for e in entries:
            fh.write(f"{e.level},{e.subsystem_id},{e.method},{e.value_hr:.17g},{e.ci_halfwidth:.17g}\n")


def _leaf_ics(topology: Topology, disk: str) -> list[str]:
    """Interconnects adjacent to the disk on its access paths."""
    out = set()
    for path in topology.access_paths(disk):
        if len(path) >= 2 and topology.components[path[-2]].kind == "interconnect":
            out.add(path[-2])
    return sorted(out)


class _GroupSubsystemModel:
    """Implicit chain of one RAID group: member disks and their leaf ics.

    A member is inaccessible when its disk is down or all of its leaf
    interconnects are down; data loss follows the group fault tolerance
    with the unrecoverable-error split on redundancy-exhausted rebuilds.
    """

    DIL = "DIL"

    def __init__(self, topology, group, disk_model, rebuild, corr,
                 disk_rate_override: dict[str, float] | None = None):
        if disk_model.variant == "detailed":
            raise ValueError("subsystem models support exponential and three_state disks")
        self.group = group
        self.disk_model = disk_model
        self.rebuild = rebuild
        self.corr = corr
        self.disks = list(group.members)
        self.ics = {d: _leaf_ics(topology, d) for d in self.disks}
        self.override = disk_rate_override or {}
        order = list(self.disks)
        for d in self.disks:
            order.extend(self.ics[d])
        self.order = order
        self.index = {c: i for i, c in enumerate(order)}
        self.ic_rates = {
            ic: (topology.failure_rate(ic), topology.repair_rate(ic))
            for ics in self.ics.values()
            for ic in ics
        }
        self.f = group.fault_tolerance
        enc = {d: topology.enclosure_of(d) for d in self.disks}
        self.partners = {
            d: [o for o in self.disks if o != d and enc[o] == enc[d]] for d in self.disks
        }

    def initial_state(self):
        return (0,) * len(self.order)

    def _disk_down(self, state, d):
        return state[self.index[d]] == 1

    def member_inaccessible(self, state, d):
        if self._disk_down(state, d):
            return True
        ics = self.ics[d]
        return bool(ics) and all(state[self.index[ic]] == 1 for ic in ics)

    def _degraded(self, state):
        return sum(self.member_inaccessible(state, d) for d in self.disks)

    def labels_of(self, state):
        if state == self.DIL:
            return frozenset({"DIL"})
        return frozenset({"DIL"}) if self._degraded(state) > self.f else frozenset()

    def _disk_rate(self, state, d):
        if d in self.override:
            return self.override[d]
        if self.disk_model.variant == "exponential":
            return self.disk_model.rate
        ph = self.disk_model.phase
        return ph.alpha if state[self.index[d]] == 0 else ph.beta

    def transitions(self, state):
        if state == self.DIL:
            return
        mu, h, p = self.rebuild.rebuild_rate, self.rebuild.uer_prob, self.corr.p
        three = self.disk_model.variant == "three_state" and not self.override
        for d in self.disks:
            i = self.index[d]
            if state[i] != 1:
                lam = self._disk_rate(state, d)
                partners = [o for o in self.partners[d] if not self._disk_down(state, o)]
                splits = [(lam, (d,))]
                if p > 0.0 and partners:
                    splits = [(lam * (1.0 - p), (d,))]
                    share = lam * p / len(partners)
                    splits.extend((share, (d, o)) for o in partners)
                for rate, victims in splits:
                    nxt = list(state)
                    for v in victims:
                        nxt[self.index[v]] = 1
                    yield rate, tuple(nxt)
                if three and state[i] == 0:
                    nxt = list(state)
                    nxt[i] = 2
                    yield self.disk_model.phase.sigma, tuple(nxt)
            else:
                nxt = list(state)
                nxt[i] = 0
                if h > 0.0 and self._degraded(state) == self.f:
                    yield mu * h, self.DIL
                    yield mu * (1.0 - h), tuple(nxt)
                else:
                    yield mu, tuple(nxt)
        for ic, (fr, rr) in self.ic_rates.items():
            j = self.index[ic]
            nxt = list(state)
            nxt[j] = 1 - state[j]
            yield (fr if state[j] == 0 else rr), tuple(nxt)


class _DiskSubsystemModel:
    """One disk plus its leaf interconnects, absorbed at first inaccessibility."""

    DIL = "DIL"

    def __init__(self, topology, disk, disk_model):
        self.disk = disk
        self.ics = _leaf_ics(topology, disk)
        self.order = [disk] + self.ics
        self.index = {c: i for i, c in enumerate(self.order)}
        self.disk_model = disk_model
        self.ic_rates = {
            ic: (topology.failure_rate(ic), topology.repair_rate(ic)) for ic in self.ics
        }

    def initial_state(self):
        return (0,) * len(self.order)

    def labels_of(self, state):
        if state == self.DIL:
            return frozenset({"DIL"})
        if state[0] == 1:
            return frozenset({"DIL"})
        if self.ics and all(state[self.index[ic]] == 1 for ic in self.ics):
            return frozenset({"DIL"})
        return frozenset()

    def transitions(self, state):
        if state == self.DIL:
            return
        if self.disk_model.variant == "exponential":
            lam = self.disk_model.rate
        else:
            ph = self.disk_model.phase
            lam = ph.alpha if state[0] == 0 else ph.beta
            if state[0] == 0:
                nxt = list(state)
                nxt[0] = 2
                yield ph.sigma, tuple(nxt)
        nxt = list(state)
        nxt[0] = 1
        yield lam, tuple(nxt)
        for ic, (fr, rr) in self.ic_rates.items():
            j = self.index[ic]
            nxt = list(state)
            nxt[j] = 1 - state[j]
            yield (fr if state[j] == 0 else rr), tuple(nxt)


class _TopLevelModel:
    """Shared components plus per-group equivalent failure rates.

    Group data loss at this level comes either from the group equivalent
    (summed into a direct transition to the sink) or from shared-path
    failures making more than f members inaccessible, where members are
    judged by their path prefixes above the leaf interconnects.
    """

    DIL = "DIL"

    def __init__(self, topology: Topology, group_rates: dict[str, float]):
        self.topology = topology
        leaf: set[str] = set()
        for g in topology.raid_groups:
            for d in g.members:
                leaf.add(d)
                leaf.update(_leaf_ics(topology, d))
        self.order = sorted(c for c in topology.components if c not in leaf)
        self.index = {c: i for i, c in enumerate(self.order)}
        self.rates = [
            (topology.failure_rate(c), topology.repair_rate(c)) for c in self.order
        ]
        self.enc_idx = {
            c: self.index.get(topology.enclosure_of(c), -1) for c in topology.components
        }
        # per disk: list of shared-path prefixes (component index lists)
        self.prefixes: dict[str, list[list[int]]] = {}
        for g in topology.raid_groups:
            for d in g.members:
                pres = []
                for path in topology.access_paths(d):
                    pres.append([self.index[c] for c in path[:-1] if c in self.index])
                self.prefixes[d] = pres
        self.groups = topology.raid_groups
        self.eq_rate = sum(group_rates.values())

    def initial_state(self):
        return (0,) * len(self.order)

    def _down(self, state, idx, comp):
        if state[idx] == 1:
            return True
        e = self.enc_idx[comp]
        return e >= 0 and state[e] == 1

    def _member_inaccessible(self, state, d):
        enc = self.enc_idx[d]
        if enc >= 0 and state[enc] == 1:
            return True
        for pre in self.prefixes[d]:
            if all(state[i] == 0 and not self._enc_down(state, i) for i in pre):
                return False
        return True

    def _enc_down(self, state, idx):
        e = self.enc_idx[self.order[idx]]
        return e >= 0 and state[e] == 1

    def labels_of(self, state):
        if state == self.DIL:
            return frozenset({"DIL"})
        for g in self.groups:
            bad = 0
            for d in g.members:
                if self._member_inaccessible(state, d):
                    bad += 1
                    if bad > g.fault_tolerance:
                        return frozenset({"DIL"})
        return frozenset()

    def transitions(self, state):
        if state == self.DIL:
            return
        if self.eq_rate > 0.0:
            yield self.eq_rate, self.DIL
        for i, (fr, rr) in enumerate(self.rates):
            nxt = list(state)
            nxt[i] = 1 - state[i]
            yield (fr if state[i] == 0 else rr), tuple(nxt)


def _solve_submodel(model, label_id, level, plan) -> tuple[float, LevelResult]:
    method = plan.method
    if method in ("auto", "numeric"):
        try:
            chain, _ = explore(
                [(model.initial_state(), 1.0)],
                model.transitions,
                model.labels_of,
                state_budget=plan.state_budget,
            )
            value = mtta(chain, "DIL", plan.solve_options)
            return value, LevelResult(level, label_id, "numeric", value, 0.0, chain.n)
        except StateBudgetExceeded:
            if method == "numeric":
                raise
    est = simulate_mtta(model, plan.sim_options)
    return est.mean, LevelResult(level, label_id, "simulate", est.mean, est.half_width, 0)


def decompose_solve(
    topology: Topology,
    plan: DecompositionPlan,
    disk_model: DiskModelSpec,
    rebuild: RebuildSpec,
    corr: CorrelationSpec = NO_CORRELATION,
) -> tuple[float, list[LevelResult]]:
    """Bottom-up decomposition solve of the whole-system MTTDIL."""
    report: list[LevelResult] = []
    if plan.levels == 1:
        chain = build_system_ctmc(topology, disk_model, rebuild, corr, plan.state_budget)
        value = mtta(chain, "DIL", plan.solve_options)
        report.append(LevelResult(0, "system", "numeric", value, 0.0, chain.n))
        return value, report

    group_rates: dict[str, float] = {}
    for group in topology.raid_groups:
        override = None
        if plan.levels == 3:
            override = {}
            for d in group.members:
                leaf = _DiskSubsystemModel(topology, d, disk_model)
                value, res = _solve_submodel(leaf, d, 0, plan)
                override[d] = equivalent_component(value)
                report.append(res)
        sub = _GroupSubsystemModel(
            topology, group, disk_model, rebuild, corr, disk_rate_override=override
        )
        value, res = _solve_submodel(sub, group.id, 1, plan)
        group_rates[group.id] = equivalent_component(value)
        report.append(res)

    top = _TopLevelModel(topology, group_rates)
    value, res = _solve_submodel(top, "system", 2, plan)
    report.append(res)
    return value, report


@dataclass(frozen=True)
class DiscretizationParams:
    """Tail threshold, step size (the difference target), and optional range cap."""

    delta: float = 1e-4
    step: float = 175.0
    max_doublings: int = 60

    def __post_init__(self):
        if not (self.delta > 0 and self.step > 0):
            raise ValueError("delta and step must be positive")


def discretized_mean(
    F: Callable[[float], float],
    n: int,
    params: DiscretizationParams,
    F_halfwidth: Callable[[float], float] | None = None,
) -> tuple[float, float]:
    """Riemann-sum bracket (L, U) of the mean of min over n subsystems.

    g(t) = (1 - F(t))**n; the range grows by doubling until g < delta,
    then U and L are the upper and lower sums over steps of the given
    size, so L < E[X] < U and U - L is at most one step for monotone g.
    With ``F_halfwidth`` the estimator uncertainty is propagated through
    the power, widening the bracket pessimistically.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def g_hi(t: float) -> float:
        f = F(t)
        if F_halfwidth is not None:
            f = max(f - F_halfwidth(t), 0.0)
        return (1.0 - min(max(f, 0.0), 1.0)) ** n

    def g_lo(t: float) -> float:
        f = F(t)
        if F_halfwidth is not None:
            f = min(f + F_halfwidth(t), 1.0)
        return (1.0 - min(max(f, 0.0), 1.0)) ** n

    upper = params.step
    for _ in range(params.max_doublings):
        if g_hi(upper) < params.delta:
            break
        upper *= 2.0
    else:
        raise RuntimeError("g(max) did not fall below delta within the doubling cap")
    k = int(math.ceil(upper / params.step))
    grid = params.step * np.arange(k + 1)
    hi = np.array([g_hi(t) for t in grid])
    lo = np.array([g_lo(t) for t in grid])
    u = params.step * float(hi[:-1].sum())
    l = params.step * float(lo[1:].sum())
    return l, u


def estimate_p(
    model_family: Callable[[float], float],
    target_mttdil: float,
    bracket: tuple[float, float] = (0.0, 0.9),
    rel_tol: float = 0.005,
    audit_points: int = 5,
) -> float:
    """Correlation probability whose model MTTDIL matches the target.

    The family must be continuous and monotone decreasing in p over the
    bracket (audited on a coarse grid before bisecting); the match is to
    ``rel_tol`` of the target.
    """
    lo, hi = bracket
    if not 0.0 <= lo < hi:
        raise ValueError("invalid bracket")
    grid = np.linspace(lo, hi, max(audit_points, 2))
    values = [model_family(float(p)) for p in grid]
    if any(b > a for a, b in zip(values, values[1:])):
        raise ValueError("model MTTDIL is not monotone decreasing in p over the bracket")
    if not values[-1] <= target_mttdil <= values[0]:
        raise ValueError(
            f"target {target_mttdil:g} outside achievable range "
            f"[{values[-1]:g}, {values[0]:g}]"
        )
    f_lo = values[0]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = model_family(mid)
        if abs(value - target_mttdil) <= rel_tol * target_mttdil:
            return mid
        if value > target_mttdil:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)
