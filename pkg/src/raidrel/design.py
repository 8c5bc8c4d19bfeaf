"""Design-space tools: enclosure spanning and configuration comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .builder import CorrelationSpec, DiskModelSpec, NO_CORRELATION, RebuildSpec, build_system_ctmc
from .ctmc import SolveOptions, StateBudgetExceeded, mtta
from .hierarchy import DecompositionPlan, decompose_solve
from .simulate import SimOptions
from .topology import Topology

__all__ = [
    "SpanPlan",
    "greedy_span",
    "correlated_span_rate",
    "span_plan_correlated_rate",
    "ConfigCase",
    "ConfigResult",
    "compare_configs",
    "write_comparison_csv",
]


@dataclass(frozen=True)
class SpanPlan:
    """Disks-per-enclosure assignment for one RAID group."""

    counts: tuple[int, ...]
    n: int
    m: int
    f: int

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(self.counts))
        if sum(self.counts) != self.n:
            raise ValueError("counts must sum to n")
        if len(self.counts) > self.m:
            raise ValueError("uses more than m enclosures")

    @property
    def enclosures_used(self) -> int:
        return sum(1 for c in self.counts if c > 0)


def greedy_span(n: int, m: int, f: int, capacities=None) -> SpanPlan:
    """Greedy enclosure spanning for an f-tolerant group of n disks.

    While more than m*f disks remain, the highest-capacity enclosure is
    filled outright (capacity ties break toward the lowest index); once
    n <= m*f, disks go f at a time into empty enclosures with the final
    remainder (< f) in the next one.
    """
    if n < 1 or m < 1 or f < 1:
        raise ValueError("require n, m, f >= 1")
    caps = list(capacities) if capacities is not None else [24] * m
    if len(caps) != m:
        raise ValueError("capacities must have length m")
    if sum(caps) < n:
        raise ValueError("insufficient total capacity")
    counts = [0] * m
    remaining = list(range(m))  # enclosure indices still empty
    n_left = n
    while n_left > 0:
        if n_left <= len(remaining) * f:
            for idx in list(remaining):
                take = min(f, n_left)
                if caps[idx] < take:
                    raise ValueError(f"enclosure {idx} capacity below placement of {take}")
                counts[idx] = take
                n_left -= take
                remaining.remove(idx)
                if n_left == 0:
                    break
            break
        # fill the highest-capacity remaining enclosure outright
        best = max(remaining, key=lambda i: (caps[i], -i))
        d = min(caps[best], n_left)
        counts[best] = d
        n_left -= d
        remaining.remove(best)
        if not remaining and n_left > 0:
            raise ValueError("insufficient capacity in remaining enclosures")
    return SpanPlan(counts=tuple(counts), n=n, m=m, f=f)


def correlated_span_rate(n: int, m: int, lam: float, p: float) -> float:
    """Data-loss rate from correlated pair failures with n disks split evenly
    over m enclosures: m * C(n/m, 2) * lam * p."""
    if n % m != 0:
        raise ValueError("m must divide n for the equal-split form")
    per = n // m
    if per < 1:
        raise ValueError("need at least one disk per enclosure")
    return m * math.comb(per, 2) * lam * p


def span_plan_correlated_rate(plan: SpanPlan, lam: float, p: float) -> float:
    """Extension of the equal-split formula to an explicit plan: sum of
    C(n_i, 2) * lam * p over enclosures. Matches correlated_span_rate when
    the plan is an even split."""
    return sum(math.comb(c, 2) for c in plan.counts) * lam * p


@dataclass(frozen=True)
class ConfigCase:
    """One candidate configuration for comparison."""

    id: str
    topology: Topology
    disk_model: DiskModelSpec
    rebuild: RebuildSpec
    corr: CorrelationSpec = NO_CORRELATION
    extra_cost_note: str = ""


@dataclass(frozen=True)
class ConfigResult:
    id: str
    measure_hr: float
    gain_vs_baseline: float
    method: str
    extra_cost_note: str


def compare_configs(
    cases: list[ConfigCase],
    measure: str = "mttdil",
    state_budget: int = 200_000,
    sim_options: SimOptions = SimOptions(),
) -> list[ConfigResult]:
    """Solve each configuration and rank by the measure.

    The first case is the baseline for gain ratios. Configurations that
    exceed the state budget fall back to decomposition.
    """
    if measure != "mttdil":
        raise ValueError("only the mttdil measure is supported here")
    if len(cases) < 2:
        raise ValueError("need at least two configurations")
    values: list[tuple[str, float, str, str]] = []
    for case in cases:
        try:
            chain = build_system_ctmc(
                case.topology, case.disk_model, case.rebuild, case.corr, state_budget
            )
            value = mtta(chain)
            method = "numeric"
        except StateBudgetExceeded:
            plan = DecompositionPlan(levels=2, state_budget=state_budget, sim_options=sim_options)
            value, _ = decompose_solve(
                case.topology, plan, case.disk_model, case.rebuild, case.corr
            )
            method = "decompose"
        values.append((case.id, value, method, case.extra_cost_note))
    base = values[0][1]
    results = [
        ConfigResult(cid, v, v / base, method, note) for cid, v, method, note in values
    ]
    return sorted(results, key=lambda r: -r.measure_hr)


def write_comparison_csv(path, results: list[ConfigResult]) -> None:
    with open(path, "w") as fh:
        fh.write("config_id,measure_hr,gain_vs_baseline,extra_cost_note\n")
        for r in results:
            fh.write(f"{r.id},{r.measure_hr:.17g},{r.gain_vs_baseline:.17g},{r.extra_cost_note}\n")
