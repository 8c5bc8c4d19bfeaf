"""Factory functions for the shipped example configurations.

The figure wirings are documented readings of the storage diagrams:

* ``fig1a``/``fig1b``: a 4-disk RAID5 behind one controller chain, in
  one enclosure or spanned across two (the second enclosure's expander
  daisy-chained from the first).
* ``fig5``: 2 controllers, 4 enclosures, 24 disks as 4 RAID5 groups.
  Enclosures 1 and 2 carry expander pairs (one per controller domain)
  and dual-ported disks; enclosures 3 and 4 are daisy-chained behind 1
  and 2. In the single-pathing variant only the A-side daisy chain
  exists, so their disks have exactly one access path; the multipathing
  variant adds the B-side expanders and links (2 expanders and 14
  cables more, 12 of them disk ports), giving those disks two paths.
* ``table3_raid5``: one enclosure, a controller pair, n-disk RAID5
  used for the occupancy-threshold MTTDIL table and p-estimation.
* ``raid_group_detailed``: minimal wrapper (controller, expander,
  enclosure) around an n-disk group for the pure disk-subsystem DDF
  tables; path components are deliberately quiet there.
"""

from __future__ import annotations

from dataclasses import dataclass

from .builder import (
    CorrelationSpec,
    DEFAULT_REBUILD,
    DiskModelSpec,
    NO_CORRELATION,
    RebuildSpec,
)
from .topology import ComponentSpec, EnclosurePolicy, RaidGroup, Topology

__all__ = ["CaseConfig", "fig1a", "fig1b", "fig5", "table3_raid5", "raid_group_detailed"]

# Component MTTFs (hours) from the vendor table.
CONTROLLER_MTTF = 604_440.0
EXPANDER_MTTF = 2_560_000.0
INTERCONNECT_MTTF = 200_000.0
DISK_MTTF = 33.0 * 8760.0  # 33 years
COMPONENT_MTTR = 0.5

POLICY = EnclosurePolicy(capacity=24, threshold=12, mttf_below_hr=28_400.0, mttf_above_hr=11_100.0)


@dataclass(frozen=True)
class CaseConfig:
    """Topology plus the failure models needed to solve it."""

    topology: Topology
    disk_model: DiskModelSpec
    rebuild: RebuildSpec
    corr: CorrelationSpec = NO_CORRELATION


def _ctrl(i):
    return ComponentSpec(f"c{i}", "controller", CONTROLLER_MTTF, COMPONENT_MTTR)


def _exp(name):
    return ComponentSpec(name, "expander", EXPANDER_MTTF, COMPONENT_MTTR)


def _ic(name):
    return ComponentSpec(name, "interconnect", INTERCONNECT_MTTF, COMPONENT_MTTR)


def _enc(name):
    return ComponentSpec(name, "enclosure", None, COMPONENT_MTTR)


def _disk(name, mttr=30.0):
    return ComponentSpec(name, "disk", DISK_MTTF, mttr)


def fig1a() -> CaseConfig:
    """4-disk RAID5 in one enclosure behind a single controller chain."""
    comps = [_ctrl(0), _ic("ic_c0"), _exp("x1"), _enc("enc1")]
    links = [("c0", "ic_c0"), ("ic_c0", "x1")]
    containment = [("enc1", "x1")]
    for i in range(1, 5):
        comps += [_disk(f"d{i}"), _ic(f"ic_d{i}")]
        links += [("x1", f"ic_d{i}"), (f"ic_d{i}", f"d{i}")]
        containment.append(("enc1", f"d{i}"))
    topo = Topology(
        comps,
        links,
        [RaidGroup("g1", "RAID5", tuple(f"d{i}" for i in range(1, 5)))],
        containment,
        POLICY,
    )
    return CaseConfig(topo, DiskModelSpec.exponential(1.0 / DISK_MTTF), DEFAULT_REBUILD)


def fig1b() -> CaseConfig:
    """4-disk RAID5 spanned 2+2 across two enclosures."""
    comps = [_ctrl(0), _ic("ic_c0"), _exp("x1"), _exp("x2"), _ic("ic_x1_x2"),
             _enc("enc1"), _enc("enc2")]
    links = [("c0", "ic_c0"), ("ic_c0", "x1"), ("x1", "ic_x1_x2"), ("ic_x1_x2", "x2")]
    containment = [("enc1", "x1"), ("enc2", "x2")]
    for i in range(1, 5):
        enc, exp = ("enc1", "x1") if i <= 2 else ("enc2", "x2")
        comps += [_disk(f"d{i}"), _ic(f"ic_d{i}")]
        links += [(exp, f"ic_d{i}"), (f"ic_d{i}", f"d{i}")]
        containment.append((enc, f"d{i}"))
    topo = Topology(
        comps,
        links,
        [RaidGroup("g1", "RAID5", tuple(f"d{i}" for i in range(1, 5)))],
        containment,
        POLICY,
    )
    return CaseConfig(topo, DiskModelSpec.exponential(1.0 / DISK_MTTF), DEFAULT_REBUILD)


def fig5(multipath: bool) -> CaseConfig:
    """4 enclosures, 24 disks as 4 RAID5 groups, daisy-chained rear pair."""
    comps = [_ctrl(0), _ctrl(1)]
    links: list[tuple[str, str]] = []
    containment: list[tuple[str, str]] = []
    groups = []

    sides = ("a", "b") if multipath else ("a",)
    for e in range(1, 5):
        comps.append(_enc(f"enc{e}"))
        enc_sides = ("a", "b") if e <= 2 else sides
        for s in enc_sides:
            comps.append(_exp(f"x{e}{s}"))
            containment.append((f"enc{e}", f"x{e}{s}"))
    # controller-to-front-enclosure wiring, one domain per controller
    for e, s, c in ((1, "a", 0), (2, "a", 0), (1, "b", 1), (2, "b", 1)):
        ic = f"ic_c{c}_x{e}{s}"
        comps.append(_ic(ic))
        links += [(f"c{c}", ic), (ic, f"x{e}{s}")]
    # daisy chains from front to rear enclosures, per available domain
    for front, rear in ((1, 3), (2, 4)):
        for s in sides:
            ic = f"ic_x{front}{s}_x{rear}{s}"
            comps.append(_ic(ic))
            links += [(f"x{front}{s}", ic), (ic, f"x{rear}{s}")]

    for e in range(1, 5):
        members = []
        disk_sides = ("a", "b") if (e <= 2 or multipath) else ("a",)
        for i in range(1, 7):
            d = f"d{e}_{i}"
            comps.append(_disk(d))
            containment.append((f"enc{e}", d))
            members.append(d)
            for s in disk_sides:
                ic = f"ic_{d}{s}"
                comps.append(_ic(ic))
                links += [(f"x{e}{s}", ic), (ic, d)]
        groups.append(RaidGroup(f"g{e}", "RAID5", tuple(members)))

    topo = Topology(comps, links, groups, containment, POLICY)
    return CaseConfig(topo, DiskModelSpec.exponential(1.0 / DISK_MTTF), RebuildSpec.from_mean(30.0))


def table3_raid5(
    n: int = 8,
    threshold: int = 12,
    disk_model: DiskModelSpec | None = None,
    p: float = 0.0,
) -> CaseConfig:
    """n-disk RAID5 in one enclosure behind a redundant controller pair."""
    policy = EnclosurePolicy(
        capacity=24,
        threshold=threshold,
        mttf_below_hr=POLICY.mttf_below_hr,
        mttf_above_hr=POLICY.mttf_above_hr,
    )
    comps = [_ctrl(0), _ctrl(1), _ic("ic_c0"), _ic("ic_c1"), _exp("x1"), _enc("enc1")]
    links = [("c0", "ic_c0"), ("ic_c0", "x1"), ("c1", "ic_c1"), ("ic_c1", "x1")]
    containment = [("enc1", "x1")]
    members = []
    for i in range(1, n + 1):
        d = f"d{i}"
        comps += [_disk(d), _ic(f"ic_{d}")]
        links += [("x1", f"ic_{d}"), (f"ic_{d}", d)]
        containment.append(("enc1", d))
        members.append(d)
    topo = Topology(comps, links, [RaidGroup("g1", "RAID5", tuple(members))], containment, policy)
    return CaseConfig(
        topo,
        disk_model or DiskModelSpec.three_state(),
        DEFAULT_REBUILD,
        CorrelationSpec(p) if p > 0 else NO_CORRELATION,
    )


def raid_group_detailed(n: int = 6, level: str = "RAID5") -> CaseConfig:
    """Bare n-disk group with a minimal path wrapper, for DDF tables."""
    comps = [_ctrl(0), _ic("ic_c0"), _exp("x1"), _enc("enc1")]
    links = [("c0", "ic_c0"), ("ic_c0", "x1")]
    containment = [("enc1", "x1")]
    members = []
    for i in range(1, n + 1):
        d = f"d{i}"
        comps.append(_disk(d))
        links.append(("x1", d))
        containment.append(("enc1", d))
        members.append(d)
    topo = Topology(comps, links, [RaidGroup("g1", level, tuple(members))], containment, POLICY)
    return CaseConfig(topo, DiskModelSpec.detailed(), RebuildSpec.from_mean(16.6347), NO_CORRELATION)
