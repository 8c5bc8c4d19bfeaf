"""Translate topologies and failure models into CTMCs.

Three disk-model variants are supported:

* ``exponential``: constant-rate disks; RAID groups become the classic
  aggregate counting chain (working / degraded tiers / data loss), with
  an optional correlated-failure split and an unrecoverable-error split
  on rebuilds that run with redundancy exhausted.
* ``three_state``: disks age through a burn-in phase (Young/BurntIn)
  with distinct failure rates; group chains count disks per phase.
* ``detailed``: adds latent defects arriving at a constant rate, scrub
  completion through 3 Erlang stages, and operational-failure restore
  through 3 Erlang stages. Data loss occurs at an operational-failure
  event that either exceeds the group's fault tolerance or exactly
  exhausts it while another surviving disk carries an unscrubbed defect.
  In the chain, operational failures fire from the clean phases only;
  the short defective periods (about 1.7% of disk time) carry scrub and
  burn-in transitions but no failure arc. The event-driven simulator in
  ``simulate`` keeps the failure clock running through defects, which is
  the physical reading; the chain variant reproduces the published
  counting tables more closely and the gap between the two is part of
  what the approximation studies measure.

Group chains for the phase-based variants are built in exchangeable
counting form (how many disks occupy each phase), which is exact for
identically distributed members and keeps the state space polynomial.
A per-disk product form is available for exponential disks as a
cross-check. Whole-system models track every component explicitly and
are explored to an explicit chain when they fit the state budget;
otherwise they remain implicit and are consumed by the simulator.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .ctmc import Ctmc, SolveOptions, StateBudgetExceeded, explore, transient_curve
from .distributions import (
    ErlangK,
    PhaseType3,
    Weibull,
    fit_erlang,
    fit_phase3,
    max_cdf_diff,
    raw_moments,
)
from .topology import Topology

__all__ = [
    "DiskModelSpec",
    "RebuildSpec",
    "CorrelationSpec",
    "DEFAULT_THREE_STATE",
    "DEFAULT_REBUILD",
    "TTOP_WEIBULL",
    "TTR_WEIBULL",
    "TTSCR_WEIBULL",
    "TTLD_MEAN_HR",
    "default_detailed_spec",
    "build_raid_ctmc",
    "build_detailed_disk",
    "SystemModel",
    "build_system_ctmc",
    "ddf_curve",
]

# Disk reliability parameters for the simple infant-mortality model
# (burn-in, pre-burn-in failure, post-burn-in failure, per hour).
DEFAULT_THREE_STATE = PhaseType3(sigma=5.4668e-4, alpha=1.05849359e-5, beta=3.3917198e-6)

# Detailed disk lifetime laws: operational failure, restore, scrub, latent defect.
TTOP_WEIBULL = Weibull(shape=1.12, scale=461386.0)
TTR_WEIBULL = Weibull(shape=2.0, scale=12.0, offset=6.0)
TTSCR_WEIBULL = Weibull(shape=3.0, scale=168.0, offset=6.0)
TTLD_MEAN_HR = 9259.0


@dataclass(frozen=True)
class RebuildSpec:
    """Rebuild rate (per hour) and per-attempt unrecoverable-error probability."""

    rebuild_rate: float
    uer_prob: float = 0.0

    def __post_init__(self):
        if not self.rebuild_rate > 0:
            raise ValueError("rebuild_rate must be positive")
        if not 0.0 <= self.uer_prob < 1.0:
            raise ValueError("uer_prob must be in [0,1)")

    @classmethod
    def from_mean(cls, mean_hr: float, uer_prob: float = 0.0) -> "RebuildSpec":
        return cls(rebuild_rate=1.0 / mean_hr, uer_prob=uer_prob)


DEFAULT_REBUILD = RebuildSpec(rebuild_rate=1.0 / 30.0, uer_prob=0.004)


@dataclass(frozen=True)
class CorrelationSpec:
    """Probability p that a disk-failure event takes a second disk with it.

    Scope is the enclosure: the co-failed disk is drawn uniformly from the
    other operational disks sharing the failing disk's enclosure.
    """

    p: float
    scope: str = "enclosure"

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must be in [0,1)")


NO_CORRELATION = CorrelationSpec(p=0.0)


@dataclass(frozen=True)
class DiskModelSpec:
    """Disk failure model selector.

    ``exponential`` uses ``rate``; ``three_state`` uses ``phase``;
    ``detailed`` uses ``ttop``/``ttld_rate``/``ttscr``/``ttr``. The
    detailed variant carries its own Erlang restore law, so the group
    RebuildSpec does not apply to it (unrecoverable errors are produced
    by the explicit latent defects instead of a Bernoulli split).
    """

    variant: str
    rate: float | None = None
    phase: PhaseType3 | None = None
    ttop: PhaseType3 | None = None
    ttld_rate: float = 1.0 / TTLD_MEAN_HR
    ttscr: ErlangK | None = None
    ttr: ErlangK | None = None

    def __post_init__(self):
        if self.variant not in ("exponential", "three_state", "detailed"):
            raise ValueError(f"unknown disk model variant {self.variant!r}")
        if self.variant == "exponential" and not (self.rate and self.rate > 0):
            raise ValueError("exponential variant requires a positive rate")
        if self.variant == "three_state" and self.phase is None:
            raise ValueError("three_state variant requires phase parameters")
        if self.variant == "detailed" and None in (self.ttop, self.ttscr, self.ttr):
            raise ValueError("detailed variant requires ttop, ttscr and ttr")

    @classmethod
    def exponential(cls, rate: float) -> "DiskModelSpec":
        return cls(variant="exponential", rate=rate)

    @classmethod
    def three_state(cls, phase: PhaseType3 = DEFAULT_THREE_STATE) -> "DiskModelSpec":
        return cls(variant="three_state", phase=phase)

    @classmethod
    def detailed(cls, **overrides) -> "DiskModelSpec":
        base = default_detailed_spec()
        if overrides:
            from dataclasses import replace

            return replace(base, **overrides)
        return base


@functools.lru_cache(maxsize=1)
def default_detailed_spec() -> DiskModelSpec:
    """Detailed disk model with laws fitted from the Weibull parameters.

    The operational-failure branch is the moment-matched 3-state fit of
    the TTOp Weibull (both fit branches describe the same law; the one
    with the smaller cdf deviation against the Weibull is kept). Scrub
    and restore are mean-matched 3-stage Erlangs.
    """
    b1, b2 = fit_phase3(raw_moments(TTOP_WEIBULL))
    grid = np.linspace(1.0, 2e6, 2000)
    span = lambda b: np.ptp(max_cdf_diff(b, TTOP_WEIBULL, grid))
    ttop = b1 if span(b1) <= span(b2) else b2
    return DiskModelSpec(
        variant="detailed",
        ttop=ttop,
        ttld_rate=1.0 / TTLD_MEAN_HR,
        ttscr=fit_erlang(3, TTSCR_WEIBULL),
        ttr=fit_erlang(3, TTR_WEIBULL),
    )


def _fault_tolerance(level: str, n: int) -> int:
    table = {"RAID5": 1, "RAID6": 2, "RAID10": 1}
    if level == "RAID1":
        return n - 1
    if level not in table:
        raise ValueError(f"invalid RAID level {level!r}")
    return table[level]


# ---------------------------------------------------------------------------
# RAID-group chains
# ---------------------------------------------------------------------------


def build_raid_ctmc(
    n: int,
    level: str,
    disk: DiskModelSpec,
    rebuild: RebuildSpec = DEFAULT_REBUILD,
    corr: CorrelationSpec = NO_CORRELATION,
    form: str = "aggregate",
    state_budget: int = 500_000,
) -> Ctmc:
    """CTMC of one n-disk RAID group in an enclosure, absorbing at data loss."""
    f = _fault_tolerance(level, n)
    if n < f + 1:
        raise ValueError(f"need at least f+1={f+1} disks for {level}")
    if corr.p > 0 and n < 2:
        raise ValueError("correlated failure requires n >= 2")
    if form == "product":
        if disk.variant != "exponential":
            raise ValueError("product form is only supported for exponential disks")
        return _product_exponential(n, f, disk.rate, rebuild, corr, state_budget)
    if form != "aggregate":
        raise ValueError(f"unknown form {form!r}")
    if disk.variant == "exponential":
        return _aggregate_exponential(n, f, disk.rate, rebuild, corr)
    if disk.variant == "three_state":
        return _counting_three_state(n, f, disk.phase, rebuild, corr, state_budget)
    return _counting_detailed(n, f, disk, corr, state_budget)


def _aggregate_exponential(
    n: int, f: int, lam: float, rebuild: RebuildSpec, corr: CorrelationSpec
) -> Ctmc:
    # states 0..f = number of failed disks; f+1 = data loss
    dil = f + 1
    mu, h, p = rebuild.rebuild_rate, rebuild.uer_prob, corr.p
    transitions: list[tuple[int, int, float]] = []
    for k in range(f + 1):
        up = n - k
        event = up * lam
        if up >= 2 and p > 0.0:
            transitions.append((k, min(k + 2, dil), event * p))
            transitions.append((k, k + 1, event * (1.0 - p)))
        else:
            transitions.append((k, k + 1, event))
        if k >= 1:
            if k == f and h > 0.0:
                transitions.append((k, k - 1, mu * (1.0 - h)))
                transitions.append((k, dil, mu * h))
            else:
                transitions.append((k, k - 1, mu))
    # merge parallel edges into DIL automatically via Ctmc coalescing
    initial = np.zeros(dil + 1)
    initial[0] = 1.0
    return Ctmc(dil + 1, transitions, initial, {"DIL": [dil]})


def _product_exponential(
    n: int, f: int, lam: float, rebuild: RebuildSpec, corr: CorrelationSpec, budget: int
) -> Ctmc:
    # per-disk up/down bits with independent per-disk rebuild; equivalent to
    # the aggregate chain for f=1 where at most one rebuild can be active
    mu, h, p = rebuild.rebuild_rate, rebuild.uer_prob, corr.p
    dil = "DIL"

    def transitions_of(state):
        if state == dil:
            return
        down = sum(state)
        for i, s in enumerate(state):
            if s == 0:
                others_up = [j for j in range(n) if j != i and state[j] == 0]
                if others_up and p > 0.0:
                    share = p * lam / len(others_up)
                    for j in others_up:
                        nxt = list(state)
                        nxt[i] = nxt[j] = 1
                        yield share, dil if down + 2 > f else tuple(nxt)
                    rate = lam * (1.0 - p)
                else:
                    rate = lam
                nxt = list(state)
                nxt[i] = 1
                yield rate, dil if down + 1 > f else tuple(nxt)
            else:
                if down == f and h > 0.0:
                    yield mu * h, dil
                    success = mu * (1.0 - h)
                else:
                    success = mu
                nxt = list(state)
                nxt[i] = 0
                yield success, tuple(nxt)

    chain, _ = explore(
        [((0,) * n, 1.0)],
        transitions_of,
        lambda s: frozenset({"DIL"}) if s == dil else frozenset(),
        state_budget=budget,
    )
    return chain


def _counting_three_state(
    n: int, f: int, phase: PhaseType3, rebuild: RebuildSpec, corr: CorrelationSpec, budget: int
) -> Ctmc:
    # state = (nY, nB, k); restored disks come back young; one rebuild at a time
    mu, h, p = rebuild.rebuild_rate, rebuild.uer_prob, corr.p
    sigma, alpha, beta = phase.sigma, phase.alpha, phase.beta
    dil = "DIL"

    def after_fail(ny, nb, k, extra_from_y):
        # one disk already removed by the caller; possibly remove a pair victim
        up = ny + nb
        k2 = k + 1
        out = []
        if p > 0.0 and up >= 1:
            if ny:
                out.append((p * ny / up, (ny - 1, nb, min(k2 + 1, f + 1))))
            if nb:
                out.append((p * nb / up, (ny, nb - 1, min(k2 + 1, f + 1))))
            out.append((1.0 - p, (ny, nb, k2)))
        else:
            out.append((1.0, (ny, nb, k2)))
        return out

    def transitions_of(state):
        if state == dil:
            return
        ny, nb, k = state
        if ny:
            yield ny * sigma, (ny - 1, nb + 1, k)
            for frac, (y2, b2, k2) in after_fail(ny - 1, nb, k, True):
                yield ny * alpha * frac, dil if k2 > f else (y2, b2, k2)
        if nb:
            for frac, (y2, b2, k2) in after_fail(ny, nb - 1, k, False):
                yield nb * beta * frac, dil if k2 > f else (y2, b2, k2)
        if k:
            if k == f and h > 0.0:
                yield mu * h, dil
                yield mu * (1.0 - h), (ny + 1, nb, k - 1)
            else:
                yield mu, (ny + 1, nb, k - 1)

    chain, _ = explore(
        [((n, 0, 0), 1.0)],
        transitions_of,
        lambda s: frozenset({"DIL"}) if s == dil else frozenset(),
        state_budget=budget,
    )
    return chain


# Detailed-model phase indices: 0 Young, 1 BurntIn, 2-4 defect while young
# (scrub stages 1-3), 5-7 defect while burnt-in (scrub stages 1-3).
_N_PHASES = 8
_DEFECT_PHASES = (2, 3, 4, 5, 6, 7)


def _counting_detailed(
    n: int, f: int, disk: DiskModelSpec, corr: CorrelationSpec, budget: int
) -> Ctmc:
    sigma, alpha, beta = disk.ttop.sigma, disk.ttop.alpha, disk.ttop.beta
    lam_ld = disk.ttld_rate
    lam_scr = disk.ttscr.lam
    lam_r = disk.ttr.lam
    n_restore_stages = disk.ttr.k
    p = corr.p
    dil = "DIL"

    def phase_exits(ph):
        # (rate, dest_phase or "FAIL") pairs for one disk in phase ph;
        # defect phases age and scrub but carry no failure arc
        if ph == 0:
            out = [(sigma, 1), (alpha, "FAIL")]
            if lam_ld > 0:
                out.append((lam_ld, 2))
            return out
        if ph == 1:
            out = [(beta, "FAIL")]
            if lam_ld > 0:
                out.append((lam_ld, 5))
            return out
        if ph in (2, 3, 4):
            nxt = ph + 1 if ph < 4 else 0
            return [(sigma, ph + 3), (lam_scr, nxt)]
        nxt = ph + 1 if ph < 7 else 1
        return [(lam_scr, nxt)]

    exits = [phase_exits(ph) for ph in range(_N_PHASES)]

    def defect_elsewhere(counts):
        return any(counts[q] for q in _DEFECT_PHASES)

    def fail_outcome(counts, k_before, extra_removed=0):
        counts = tuple(counts)
        k_after = k_before + 1 + extra_removed
        if k_after > f or (k_after == f and defect_elsewhere(counts)):
            return dil, None
        return None, counts

    def transitions_of(state):
        if state == dil:
            return
        counts, restores = state
        k = len(restores)
        n_up = n - k
        for ph in range(_N_PHASES):
            c = counts[ph]
            if not c:
                continue
            for rate, dest in exits[ph]:
                total = c * rate
                if dest != "FAIL":
                    nxt = list(counts)
                    nxt[ph] -= 1
                    nxt[dest] += 1
                    yield total, (tuple(nxt), restores)
                    continue
                removed = list(counts)
                removed[ph] -= 1
                if p > 0.0 and n_up >= 2:
                    # correlated event: a second disk fails simultaneously
                    for q in range(_N_PHASES):
                        if not removed[q]:
                            continue
                        both = list(removed)
                        both[q] -= 1
                        verdict, ok = fail_outcome(both, k, extra_removed=1)
                        share = total * p * removed[q] / (n_up - 1)
                        if verdict:
                            yield share, dil
                        else:
                            yield share, (ok, tuple(sorted(restores + (1, 1))))
                    total *= 1.0 - p
                verdict, ok = fail_outcome(removed, k)
                if verdict:
                    yield total, dil
                else:
                    yield total, (ok, tuple(sorted(restores + (1,))))
        for idx, stage in enumerate(restores):
            remaining = restores[:idx] + restores[idx + 1 :]
            if stage < n_restore_stages:
                yield lam_r, (counts, tuple(sorted(remaining + (stage + 1,))))
            else:
                nxt = list(counts)
                nxt[0] += 1
                yield lam_r, (tuple(nxt), remaining)

    start = tuple([n] + [0] * (_N_PHASES - 1))
    chain, _ = explore(
        [((start, ()), 1.0)],
        transitions_of,
        lambda s: frozenset({"DIL"}) if s == dil else frozenset(),
        state_budget=budget,
    )
    return chain


def build_detailed_disk(disk: DiskModelSpec, absorb_on_failure: bool = True) -> Ctmc:
    """Single-disk fragment of the detailed model.

    With ``absorb_on_failure`` the operational-failure state is absorbing
    (labelled ``FAIL``); otherwise the disk cycles through the Erlang
    restore stages and returns fresh.
    """
    if disk.variant != "detailed":
        raise ValueError("detailed disk spec required")
    sigma, alpha, beta = disk.ttop.sigma, disk.ttop.alpha, disk.ttop.beta
    lam_ld, lam_scr, lam_r = disk.ttld_rate, disk.ttscr.lam, disk.ttr.lam
    k_r = disk.ttr.k
    fail = _N_PHASES  # state index of the failure state
    transitions = []

    def add(i, j, r):
        if r > 0:
            transitions.append((i, j, r))

    add(0, 1, sigma)
    add(0, fail, alpha)
    add(0, 2, lam_ld)
    add(1, fail, beta)
    add(1, 5, lam_ld)
    for ph in (2, 3, 4):
        add(ph, ph + 3, sigma)
        add(ph, ph + 1 if ph < 4 else 0, lam_scr)
    for ph in (5, 6, 7):
        add(ph, ph + 1 if ph < 7 else 1, lam_scr)
    n_states = fail + 1
    labels = {"FAIL": [fail]}
    if not absorb_on_failure:
        n_states = fail + k_r
        for stage in range(k_r - 1):
            add(fail + stage, fail + stage + 1, lam_r)
        add(fail + k_r - 1, 0, lam_r)
        labels = {"FAIL": list(range(fail, fail + k_r))}
    labels["DEFECT"] = list(_DEFECT_PHASES)
    initial = np.zeros(n_states)
    initial[0] = 1.0
    return Ctmc(n_states, transitions, initial, labels)


def ddf_curve(group_model: Ctmc, times, per: float = 1000.0, opts: SolveOptions | None = None):
    """Expected data-loss events per ``per`` groups by each time.

    Computed as cohort size times the absorption probability; returns an
    array aligned with ``times``.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (np.any(times < 0) or np.any(np.diff(times) <= 0)):
        raise ValueError("times must be nonnegative ascending")
    states = sorted(group_model.states_with("DIL"))
    dists = transient_curve(group_model, times, opts)
    return per * dists[:, states].sum(axis=1)


# ---------------------------------------------------------------------------
# Whole-system model
# ---------------------------------------------------------------------------

# Disk status codes used by SystemModel states. Exponential disks use
# UP/DOWN; three-state disks use YOUNG/BURNT/DOWN. Non-disk components
# use UP/DOWN.
UP, DOWN = 0, 1
YOUNG, BURNT = 0, 2


class SystemModel:
    """Implicit CTMC over component up/down states of a whole topology.

    Data loss ("DIL") holds when any RAID group has more members
    inaccessible than its fault tolerance, where a member is inaccessible
    if the disk is down, its enclosure is down, or every cached access
    path has a broken component. Rebuild completions that run with the
    group's redundancy exhausted carry the unrecoverable-error split.
    States are tuples of per-component status codes; the absorbing
    sentinel is the string ``"DIL"``.
    """

    DIL = "DIL"

    def __init__(
        self,
        topology: Topology,
        disk_model: DiskModelSpec,
        rebuild: RebuildSpec = DEFAULT_REBUILD,
        corr: CorrelationSpec = NO_CORRELATION,
    ):
        if disk_model.variant == "detailed":
            raise ValueError("whole-system models support exponential and three_state disks")
        diags = topology.validate()
        if diags:
            raise ValueError("invalid topology: " + "; ".join(diags[:3]))
        self.topology = topology
        self.disk_model = disk_model
        self.rebuild = rebuild
        self.corr = corr

        self.order = sorted(topology.components)
        self.index = {cid: i for i, cid in enumerate(self.order)}
        self.kinds = [topology.components[cid].kind for cid in self.order]
        self.is_disk = [k == "disk" for k in self.kinds]
        self.fail_rate = [
            None if self.is_disk[i] else topology.failure_rate(cid)
            for i, cid in enumerate(self.order)
        ]
        self.repair_rate = [
            None if self.is_disk[i] else topology.repair_rate(cid)
            for i, cid in enumerate(self.order)
        ]
        self.enc_idx = [
            self.index[topology.enclosure_of(cid)] if topology.enclosure_of(cid) else -1
            for cid in self.order
        ]
        # per-disk paths as index lists excluding the disk itself
        self.disk_ids = [cid for cid in self.order if topology.components[cid].kind == "disk"]
        self.paths = {
            self.index[d]: [
                [self.index[c] for c in path[:-1]] for path in topology.access_paths(d)
            ]
            for d in self.disk_ids
        }
        self.groups = [
            ([self.index[m] for m in g.members], g.fault_tolerance, g.id)
            for g in topology.raid_groups
        ]
        self.group_of_disk: dict[int, int] = {}
        for gi, (members, _, _) in enumerate(self.groups):
            for m in members:
                self.group_of_disk[m] = gi
        self.enclosure_disks: dict[int, list[int]] = {}
        for d in self.disk_ids:
            di = self.index[d]
            self.enclosure_disks.setdefault(self.enc_idx[di], []).append(di)
        self._label_cache: dict = {}

    # -- state helpers -------------------------------------------------

    def initial_state(self):
        return (UP,) * len(self.order)

    def _comp_down(self, state, i) -> bool:
        if self.is_disk[i]:
            if state[i] == DOWN:
                return True
        elif state[i] == DOWN:
            return True
        enc = self.enc_idx[i]
        return enc >= 0 and state[enc] == DOWN

    def member_inaccessible(self, state, di) -> bool:
        if state[di] == DOWN:
            return True
        enc = self.enc_idx[di]
        if enc >= 0 and state[enc] == DOWN:
            return True
        for path in self.paths[di]:
            if all(not self._comp_down(state, c) for c in path):
                return False
        return True

    def groups_in_dil(self, state) -> list[int]:
        if state == self.DIL:
            return list(range(len(self.groups)))
        out = []
        for gi, (members, f, _) in enumerate(self.groups):
            bad = 0
            for m in members:
                if self.member_inaccessible(state, m):
                    bad += 1
                    if bad > f:
                        out.append(gi)
                        break
        return out

    def labels_of(self, state) -> frozenset[str]:
        if state == self.DIL:
            return frozenset({"DIL"})
        got = self._label_cache.get(state)
        if got is None:
            got = frozenset({"DIL"}) if self.groups_in_dil(state) else frozenset()
            if len(self._label_cache) < 2_000_000:
                self._label_cache[state] = got
        return got

    # -- transition function ---------------------------------------------

    def _disk_fail_events(self, state, i):
        """(rate, victim_indices) splits for an op failure of disk i."""
        variant = self.disk_model.variant
        if variant == "exponential":
            lam = self.disk_model.rate
        else:
            ph = self.disk_model.phase
            lam = ph.alpha if state[i] == YOUNG else ph.beta
        p = self.corr.p
        if p <= 0.0:
            return [(lam, (i,))]
        partners = [
            j
            for j in self.enclosure_disks.get(self.enc_idx[i], ())
            if j != i and state[j] != DOWN
        ]
        if not partners:
            return [(lam, (i,))]
        out = [(lam * (1.0 - p), (i,))]
        share = lam * p / len(partners)
        out.extend((share, (i, j)) for j in partners)
        return out

    def _group_degraded_count(self, state, gi) -> int:
        members, _, _ = self.groups[gi]
        return sum(1 for m in members if self.member_inaccessible(state, m))

    def transitions(self, state):
        if state == self.DIL:
            return
        mu, h = self.rebuild.rebuild_rate, self.rebuild.uer_prob
        for i in range(len(self.order)):
            if self.is_disk[i]:
                if state[i] != DOWN:
                    for rate, victims in self._disk_fail_events(state, i):
                        nxt = list(state)
                        for v in victims:
                            nxt[v] = DOWN
                        yield rate, tuple(nxt)
                    if self.disk_model.variant == "three_state" and state[i] == YOUNG:
                        nxt = list(state)
                        nxt[i] = BURNT
                        yield self.disk_model.phase.sigma, tuple(nxt)
                else:
                    gi = self.group_of_disk.get(i)
                    nxt = list(state)
                    nxt[i] = YOUNG if self.disk_model.variant == "three_state" else UP
                    if (
                        h > 0.0
                        and gi is not None
                        and self._group_degraded_count(state, gi) == self.groups[gi][1]
                    ):
                        yield mu * h, self.DIL
                        yield mu * (1.0 - h), tuple(nxt)
                    else:
                        yield mu, tuple(nxt)
            else:
                nxt = list(state)
                if state[i] == UP:
                    nxt[i] = DOWN
                    yield self.fail_rate[i], tuple(nxt)
                else:
                    nxt[i] = UP
                    yield self.repair_rate[i], tuple(nxt)


def build_system_ctmc(
    topology: Topology,
    disk_model: DiskModelSpec,
    rebuild: RebuildSpec = DEFAULT_REBUILD,
    corr: CorrelationSpec = NO_CORRELATION,
    state_budget: int = 500_000,
) -> Ctmc:
    """Explicit whole-system chain with a single merged data-loss state.

    Raises StateBudgetExceeded when the reachable transient space passes
    the budget; hierarchical decomposition or simulation applies then.
    """
    model = SystemModel(topology, disk_model, rebuild, corr)
    chain, _ = explore(
        [(model.initial_state(), 1.0)],
        model.transitions,
        model.labels_of,
        state_budget=state_budget,
    )
    return chain
