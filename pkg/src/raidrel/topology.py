"""Declarative hardware-graph model of a RAID storage system.

A topology is a directed connectivity graph (controllers reach disks
through interconnects and expanders), an enclosure containment map, and
RAID-group membership. Queries are read-only; access paths are computed
once and cached on first use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

__all__ = [
    "ComponentSpec",
    "EnclosurePolicy",
    "RaidGroup",
    "Topology",
    "enclosure_rate",
    "FAULT_TOLERANCE",
]

KINDS = ("controller", "expander", "enclosure", "interconnect", "disk")

# Worst-case fault tolerance per RAID level. RAID1 tolerance is
# member-count dependent and resolved in RaidGroup.fault_tolerance;
# RAID10 is treated conservatively as single-fault tolerant.
FAULT_TOLERANCE = {"RAID5": 1, "RAID6": 2, "RAID10": 1}


@dataclass(frozen=True)
class ComponentSpec:
    """One hardware element: id, kind, MTTF (hours) and MTTR (hours)."""

    id: str
    kind: str
    mttf_hr: float | None = None
    mttr_hr: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if self.mttf_hr is not None and not self.mttf_hr > 0:
            raise ValueError(f"{self.id}: mttf must be positive")
        if self.mttr_hr is not None and not self.mttr_hr > 0:
            raise ValueError(f"{self.id}: mttr must be positive")


@dataclass(frozen=True)
class EnclosurePolicy:
    """Occupancy-dependent enclosure MTTF: a single step at the threshold."""

    capacity: int = 24
    threshold: int = 12
    mttf_below_hr: float = 28_400.0
    mttf_above_hr: float = 11_100.0

    def __post_init__(self):
        if not 1 <= self.threshold <= self.capacity:
            raise ValueError("require 1 <= threshold <= capacity")
        if not (self.mttf_below_hr >= self.mttf_above_hr > 0):
            raise ValueError("require mttf_below >= mttf_above > 0")


def enclosure_rate(policy: EnclosurePolicy, occupancy: int) -> float:
    """Failure rate (/hr) of an enclosure holding ``occupancy`` disks."""
    if not 0 < occupancy <= policy.capacity:
        raise ValueError(f"occupancy {occupancy} out of range 1..{policy.capacity}")
    mttf = policy.mttf_below_hr if occupancy <= policy.threshold else policy.mttf_above_hr
    return 1.0 / mttf


@dataclass(frozen=True)
class RaidGroup:
    id: str
    level: str
    members: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if self.level not in ("RAID1",) + tuple(FAULT_TOLERANCE):
            raise ValueError(f"unknown RAID level {self.level!r}")

    @property
    def fault_tolerance(self) -> int:
        if self.level == "RAID1":
            return len(self.members) - 1
        return FAULT_TOLERANCE[self.level]


class Topology:
    """Immutable hardware graph with RAID groups.

    ``links`` are directed connectivity edges; ``containment`` maps an
    enclosure id to the components physically inside it. An enclosure
    failure makes everything it contains inaccessible.
    """

    def __init__(
        self,
        components: list[ComponentSpec],
        links: list[tuple[str, str]],
        raid_groups: list[RaidGroup],
        containment: list[tuple[str, str]] | None = None,
        enclosure_policy: EnclosurePolicy | None = None,
    ):
        self.components: dict[str, ComponentSpec] = {}
        for comp in components:
            if comp.id in self.components:
                raise ValueError(f"duplicate component id {comp.id!r}")
            self.components[comp.id] = comp
        self.links = [tuple(l) for l in links]
        self.containment = [tuple(c) for c in (containment or [])]
        self.raid_groups = list(raid_groups)
        self.enclosure_policy = enclosure_policy
        self._out: dict[str, list[str]] = {}
        self._in: dict[str, list[str]] = {}
        for a, b in self.links:
            self._out.setdefault(a, []).append(b)
            self._in.setdefault(b, []).append(a)
        self._enclosure_of: dict[str, str] = {}
        for enc, member in self.containment:
            if member in self._enclosure_of:
                raise ValueError(f"{member!r} contained in more than one enclosure")
            self._enclosure_of[member] = enc
        self._paths: dict[str, tuple[tuple[str, ...], ...]] | None = None

    # -- accessors ---------------------------------------------------------

    def of_kind(self, kind: str) -> list[str]:
        return [c.id for c in self.components.values() if c.kind == kind]

    def enclosure_of(self, comp_id: str) -> str | None:
        return self._enclosure_of.get(comp_id)

    def occupancy(self, enclosure_id: str) -> int:
        return sum(
            1
            for enc, member in self.containment
            if enc == enclosure_id and self.components[member].kind == "disk"
        )

    def failure_rate(self, comp_id: str) -> float:
        """Exponential failure rate (/hr); enclosures fall back to the policy."""
        comp = self.components[comp_id]
        if comp.mttf_hr is not None:
            return 1.0 / comp.mttf_hr
        if comp.kind == "enclosure" and self.enclosure_policy is not None:
            return enclosure_rate(self.enclosure_policy, self.occupancy(comp_id))
        raise ValueError(f"{comp_id}: no mttf and no applicable policy")

    def repair_rate(self, comp_id: str) -> float:
        comp = self.components[comp_id]
        if comp.mttr_hr is None:
            raise ValueError(f"{comp_id}: no mttr")
        return 1.0 / comp.mttr_hr

    # -- validation --------------------------------------------------------

    def validate(self) -> list[str]:
        """All structural invariants; returns diagnostics (empty when ok)."""
        diags = []
        ids = set(self.components)
        for a, b in self.links + self.containment:
            for x in (a, b):
                if x not in ids:
                    diags.append(f"unknown component {x!r} in link")
        if diags:
            return diags

        # acyclicity of connectivity links
        state: dict[str, int] = {}

        def cyclic(node: str) -> bool:
            state[node] = 1
            for nxt in self._out.get(node, ()):
                s = state.get(nxt, 0)
                if s == 1 or (s == 0 and cyclic(nxt)):
                    return True
            state[node] = 2
            return False

        for node in self.components:
            if state.get(node, 0) == 0 and cyclic(node):
                diags.append(f"connectivity cycle through {node!r}")
                break

        for enc, member in self.containment:
            if self.components[enc].kind != "enclosure":
                diags.append(f"{enc!r} is not an enclosure but contains {member!r}")

        for disk in self.of_kind("disk"):
            if disk not in self._enclosure_of:
                diags.append(f"disk {disk!r} not inside any enclosure")
            try:
                if not self.access_paths(disk):
                    diags.append(f"unreachable disk {disk!r}")
            except (ValueError, RecursionError):
                diags.append(f"unreachable disk {disk!r}")

        if self.enclosure_policy is not None:
            for enc in self.of_kind("enclosure"):
                occ = self.occupancy(enc)
                if occ > self.enclosure_policy.capacity:
                    diags.append(f"enclosure {enc!r} over capacity ({occ})")

        seen_groups = set()
        for grp in self.raid_groups:
            if grp.id in seen_groups:
                diags.append(f"duplicate raid group id {grp.id!r}")
            seen_groups.add(grp.id)
            for m in grp.members:
                if m not in ids or self.components.get(m, None) is None:
                    diags.append(f"group {grp.id!r} member {m!r} missing")
                elif self.components[m].kind != "disk":
                    diags.append(f"group {grp.id!r} member {m!r} is not a disk")
            if len(grp.members) < grp.fault_tolerance + 1:
                diags.append(f"group {grp.id!r} smaller than f+1")
        return diags

    # -- access paths ------------------------------------------------------

    def access_paths(self, disk_id: str) -> tuple[tuple[str, ...], ...]:
        """All minimal controller-to-disk component sequences (cached)."""
        if disk_id not in self.components:
            raise ValueError(f"unknown component {disk_id!r}")
        if self.components[disk_id].kind != "disk":
            raise ValueError(f"{disk_id!r} is not a disk")
        if self._paths is None:
            self._paths = {}
        if disk_id not in self._paths:
            self._paths[disk_id] = self._compute_paths(disk_id)
        paths = self._paths[disk_id]
        if not paths:
            raise ValueError(f"disk {disk_id!r} has no controller path")
        return paths

    def _compute_paths(self, disk_id: str) -> tuple[tuple[str, ...], ...]:
        found: list[tuple[str, ...]] = []
        passthrough = ("interconnect", "expander")

        def walk(node: str, trail: list[str]):
            trail.append(node)
            if node == disk_id:
                found.append(tuple(trail))
            else:
                for nxt in self._out.get(node, ()):
                    kind = self.components[nxt].kind
                    if nxt == disk_id or kind in passthrough:
                        if nxt not in trail:
                            walk(nxt, trail)
            trail.pop()

        for ctrl in self.of_kind("controller"):
            walk(ctrl, [])
        # drop non-minimal paths (component-set supersets of another path)
        sets = [frozenset(p) for p in found]
        minimal = [
            p
            for p, s in zip(found, sets)
            if not any(o < s for o in sets)
        ]
        return tuple(sorted(minimal))

    def accessible(self, disk_id: str, down: frozenset[str]) -> bool:
        """Is the disk's data reachable given the set of down components?

        A component inside a down enclosure counts as down; the disk itself
        and its enclosure must be up, and at least one cached path must be
        fully up.
        """
        if disk_id in down:
            return False
        if self._enclosure_of.get(disk_id) in down:
            return False
        for path in self.access_paths(disk_id):
            ok = True
            for comp in path[:-1]:
                if comp in down or self._enclosure_of.get(comp) in down:
                    ok = False
                    break
            if ok:
                return True
        return False

    # -- series reduction --------------------------------------------------

    def series_reduce(self, with_notes: bool = False):
        """Merge maximal series chains into single components.

        A chain is mergeable when all members share one repair rate and any
        enclosure containment along it is redundant (every disk whose paths
        traverse the member lives in that same enclosure). Chains failing
        the repair-rate condition are left in place and flagged.
        """
        notes: list[str] = []
        chains = self._series_chains()
        comps = dict(self.components)
        links = list(self.links)
        containment = list(self.containment)
        for chain in chains:
            specs = [comps[c] for c in chain]
            mttrs = {s.mttr_hr for s in specs}
            if len(mttrs) != 1:
                notes.append(f"chain {'+'.join(chain)} not merged: differing mttr")
                continue
            if not self._containment_redundant(chain):
                notes.append(f"chain {'+'.join(chain)} not merged: containment is load-bearing")
                continue
            if any(s.mttf_hr is None for s in specs):
                notes.append(f"chain {'+'.join(chain)} not merged: policy-driven mttf")
                continue
            rate = sum(1.0 / s.mttf_hr for s in specs)
            merged = ComponentSpec(
                id="+".join(chain),
                kind=specs[0].kind,
                mttf_hr=1.0 / rate,
                mttr_hr=specs[0].mttr_hr,
            )
            first, last = chain[0], chain[-1]
            inner = set(chain)
            new_links = []
            for a, b in links:
                if a in inner and b in inner:
                    continue
                a2 = merged.id if a == last else a
                b2 = merged.id if b == first else b
                new_links.append((a2, b2))
            links = new_links
            containment = [(e, m) for e, m in containment if m not in inner]
            for cid in chain:
                del comps[cid]
            comps[merged.id] = merged
        reduced = Topology(
            list(comps.values()),
            links,
            self.raid_groups,
            containment,
            self.enclosure_policy,
        )
        return (reduced, notes) if with_notes else reduced

    def _series_chains(self) -> list[list[str]]:
        def chainable(cid: str) -> bool:
            return self.components[cid].kind != "disk"

        chains = []
        claimed: set[str] = set()
        for cid in self.components:
            if cid in claimed or not chainable(cid):
                continue
            # extend left and right along unique-successor/unique-predecessor edges
            chain = [cid]
            while True:
                head = chain[0]
                pred = self._in.get(head, [])
                if len(pred) == 1 and chainable(pred[0]) and len(self._out.get(pred[0], [])) == 1:
                    chain.insert(0, pred[0])
                else:
                    break
            while True:
                tail = chain[-1]
                succ = self._out.get(tail, [])
                if len(succ) == 1 and chainable(succ[0]) and len(self._in.get(succ[0], [])) == 1:
                    chain.append(succ[0])
                else:
                    break
            claimed.update(chain)
            if len(chain) > 1:
                chains.append(chain)
        return chains

    def _containment_redundant(self, chain: list[str]) -> bool:
        dependents: dict[str, set[str]] = {}
        for disk in self.of_kind("disk"):
            try:
                paths = self.access_paths(disk)
            except ValueError:
                continue
            for path in paths:
                for comp in path[:-1]:
                    dependents.setdefault(comp, set()).add(disk)
        for cid in chain:
            enc = self._enclosure_of.get(cid)
            if enc is None:
                continue
            for disk in dependents.get(cid, ()):
                if self._enclosure_of.get(disk) != enc:
                    return False
        return True

    # -- partitioning ------------------------------------------------------

    def independent_partition(self) -> list["Topology"]:
        """Connected components of the hardware graph as sub-topologies."""
        if not self.components:
            return []
        neighbours: dict[str, set[str]] = {c: set() for c in self.components}
        for a, b in itertools.chain(self.links, self.containment):
            neighbours[a].add(b)
            neighbours[b].add(a)
        seen: set[str] = set()
        parts: list[set[str]] = []
        for start in self.components:
            if start in seen:
                continue
            blob = {start}
            stack = [start]
            while stack:
                node = stack.pop()
                for nxt in neighbours[node]:
                    if nxt not in blob:
                        blob.add(nxt)
                        stack.append(nxt)
            seen |= blob
            parts.append(blob)
        subs = []
        for blob in sorted(parts, key=lambda s: min(s)):
            subs.append(
                Topology(
                    [c for c in self.components.values() if c.id in blob],
                    [(a, b) for a, b in self.links if a in blob],
                    [g for g in self.raid_groups if all(m in blob for m in g.members)],
                    [(e, m) for e, m in self.containment if e in blob],
                    self.enclosure_policy,
                )
            )
        return subs
