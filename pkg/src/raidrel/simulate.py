"""Monte-Carlo estimation for chains, raw-distribution systems, and fleets.

All estimators draw from counter-based Philox streams keyed by
(seed, path index), so results are reproducible bit-for-bit for a given
seed and independent of evaluation order. Confidence intervals are
Student-t; sequential estimation stops when the relative half-width
reaches the target or the path budget is exhausted (the estimate is then
flagged rather than silently accepted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np
from scipy.stats import norm, t as student_t

from .ctmc import Ctmc

__all__ = [
    "SimOptions",
    "SimEstimate",
    "RawGroupSpec",
    "IndependentGroupsModel",
    "simulate_mtta",
    "simulate_raw",
    "simulate_min_of_subsystems",
    "simulate_k_percent",
]


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one path: Philox keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, index]))


@dataclass(frozen=True)
class SimOptions:
    """Termination and reproducibility knobs for the simulators."""

    confidence: float = 0.99
    rel_halfwidth: float = 0.01
    max_path_length: float = 1e9
    seed: int = 0
    min_paths: int = 200
    max_paths: int = 200_000
    batch: int = 500

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0,1)")
        if self.max_path_length < 1:
            raise ValueError("max_path_length must be >= 1")


@dataclass(frozen=True)
class SimEstimate:
    """Point estimate with a Student-t confidence half-width."""

    mean: float
    half_width: float
    confidence: float
    n_paths: int
    seed: int
    converged: bool = True
    truncated_fraction: float = 0.0

    @property
    def flagged(self) -> bool:
        return (not self.converged) or self.truncated_fraction > 0.01

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width


def _t_halfwidth(values_sum, values_sq, n, confidence) -> float:
    if n < 2:
        return math.inf
    mean = values_sum / n
    var = max(values_sq / n - mean * mean, 0.0) * n / (n - 1)
    crit = student_t.ppf(0.5 + confidence / 2.0, n - 1)
    return crit * math.sqrt(var / n)


class _Walker:
    """Samples absorption times of an explicit or implicit chain."""

    def __init__(self, model, target_label: str):
        self.target = target_label
        if isinstance(model, Ctmc):
            rates = model.rate_matrix()
            self._rows = []
            targets = model.states_with(target_label)
            for i in range(model.n):
                sl = slice(rates.indptr[i], rates.indptr[i + 1])
                self._rows.append((rates.indices[sl], np.cumsum(rates.data[sl])))
            self._absorbing = np.zeros(model.n, dtype=bool)
            self._absorbing[list(targets)] = True
            init = model.initial
            self._init_states = np.flatnonzero(init)
            self._init_cum = np.cumsum(init[self._init_states])
            self.explicit = True
        else:
            self.model = model
            self._cache: dict = {}
            self.explicit = False

    def _implicit_row(self, state):
        row = self._cache.get(state)
        if row is None:
            succ, rates = [], []
            for rate, nxt in self.model.transitions(state):
                succ.append(nxt)
                rates.append(rate)
            row = (succ, np.cumsum(rates)) if succ else (succ, np.zeros(0))
            if len(self._cache) < 500_000:
                self._cache[state] = row
        return row

    def sample(self, rng, max_events: float) -> tuple[float, bool]:
        """One absorption time; second element False when truncated."""
        if self.explicit:
            k = int(np.searchsorted(self._init_cum, rng.random() * self._init_cum[-1]))
            state = int(self._init_states[k])
            clock = 0.0
            events = 0
            while not self._absorbing[state]:
                cols, cum = self._rows[state]
                if cum.size == 0 or cum[-1] <= 0.0:
                    return clock, False
                clock += rng.exponential(1.0 / cum[-1])
                state = int(cols[np.searchsorted(cum, rng.random() * cum[-1])])
                events += 1
                if events > max_events:
                    return clock, False
            return clock, True
        state = self.model.initial_state()
        clock = 0.0
        events = 0
        while self.target not in self.model.labels_of(state):
            succ, cum = self._implicit_row(state)
            if not succ:
                return clock, False
            clock += rng.exponential(1.0 / cum[-1])
            state = succ[np.searchsorted(cum, rng.random() * cum[-1])]
            events += 1
            if events > max_events:
                return clock, False
        return clock, True


def _sequential_mean(
    draw: Callable[[int], tuple[float, bool]], opts: SimOptions, samples_csv=None
) -> SimEstimate:
    total = 0.0
    total_sq = 0.0
    n = 0
    truncated = 0
    rows = []
    while n < opts.max_paths:
        burst = min(opts.batch, opts.max_paths - n)
        for _ in range(burst):
            value, ok = draw(n)
            if not ok:
                truncated += 1
            if samples_csv is not None:
                rows.append((n, value))
            total += value
            total_sq += value * value
            n += 1
        if n >= opts.min_paths:
            hw = _t_halfwidth(total, total_sq, n, opts.confidence)
            if hw <= opts.rel_halfwidth * abs(total / n):
                break
    mean = total / n
    hw = _t_halfwidth(total, total_sq, n, opts.confidence)
    if samples_csv is not None:
        with open(samples_csv, "w") as fh:
            fh.write("run_index,value_hr\n")
            for idx, value in rows:
                fh.write(f"{idx},{value:.17g}\n")
    return SimEstimate(
        mean=mean,
        half_width=hw,
        confidence=opts.confidence,
        n_paths=n,
        seed=opts.seed,
        converged=hw <= opts.rel_halfwidth * abs(mean),
        truncated_fraction=truncated / n,
    )


def simulate_mtta(
    model,
    opts: SimOptions = SimOptions(),
    target_label: str = "DIL",
    samples_csv=None,
) -> SimEstimate:
    """Mean hitting time of the labelled set by path sampling.

    ``model`` is an explicit Ctmc or any implicit model exposing
    ``initial_state`` / ``transitions`` / ``labels_of``.
    """
    walker = _Walker(model, target_label)

    def draw(i: int):
        return walker.sample(path_rng(opts.seed, i), opts.max_path_length)

    return _sequential_mean(draw, opts, samples_csv)


# ---------------------------------------------------------------------------
# Raw-distribution event simulation (the Weibull ground-truth oracle)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawGroupSpec:
    """Event model of one RAID group with arbitrary lifetime laws.

    Disks age with their own clocks: operational failures from ``ttop``
    (age resets on restore, since the restored drive is new), latent
    defects arriving per ``ttld`` and cleared a ``ttscr`` draw later,
    restores per ``ttr``. ``ttld=None`` disables latent defects. Data
    loss follows the same event rule as the chain builders: an
    operational failure that exceeds the fault tolerance, or exactly
    exhausts it while another surviving disk carries an uncleared defect.
    """

    n: int
    level: str
    ttop: object
    ttr: object
    ttld: object | None = None
    ttscr: object | None = None

    @property
    def fault_tolerance(self) -> int:
        table = {"RAID5": 1, "RAID6": 2, "RAID10": 1}
        if self.level == "RAID1":
            return self.n - 1
        return table[self.level]


class _Buffered:
    """Chunked draws from one distribution; cuts per-call overhead."""

    __slots__ = ("dist", "rng", "buf", "pos")

    def __init__(self, dist, rng, chunk: int = 128):
        self.dist = dist
        self.rng = rng
        self.buf = dist.sample(rng, chunk)
        self.pos = 0

    def __call__(self) -> float:
        if self.pos >= self.buf.size:
            self.buf = self.dist.sample(self.rng, self.buf.size)
            self.pos = 0
        value = self.buf[self.pos]
        self.pos += 1
        return value


def _raw_run(spec: RawGroupSpec, rng, horizon: float, max_events: float = 1e9) -> float | None:
    """First data-loss time within the horizon (may be inf), or None.

    Event-driven over one realization: each disk keeps its own clocks,
    so ages survive unrelated events, and the horizon only bounds the
    scan, never conditions the sample.
    """
    n = spec.n
    f = spec.fault_tolerance
    draw_op = _Buffered(spec.ttop, rng, 16)
    draw_r = _Buffered(spec.ttr, rng, 16)
    with_defects = spec.ttld is not None
    if with_defects:
        draw_ld = _Buffered(spec.ttld, rng)
        draw_scr = _Buffered(spec.ttscr, rng)

    fail_at = [0.0] * n  # next operational failure per disk
    down_until = [0.0] * n  # restore completion of the last failure
    defects: list[list[tuple[float, float]]] = [[] for _ in range(n)]

    def rebirth(d: int, birth: float):
        end = birth + draw_op()
        fail_at[d] = end
        lst = defects[d]
        lst.clear()
        if with_defects:
            # no query can land past the horizon, so stop generating there
            gen_end = end if end < horizon else horizon
            u = birth
            while True:
                defect_start = u + draw_ld()
                if defect_start >= gen_end:
                    break
                u = defect_start + draw_scr()
                lst.append((defect_start, min(u, end)))
                if u >= gen_end:
                    break

    for d in range(n):
        rebirth(d, 0.0)

    events = 0
    while events < max_events:
        d = min(range(n), key=fail_at.__getitem__)
        when = fail_at[d]
        if when > horizon:
            return None
        events += 1
        k_after = 1
        defect_elsewhere = False
        for other in range(n):
            if other == d:
                continue
            if down_until[other] > when:
                k_after += 1
            elif any(a <= when < b for a, b in defects[other]):
                defect_elsewhere = True
        if k_after > f or (k_after == f and defect_elsewhere):
            return when
        restored = when + draw_r()
        down_until[d] = restored
        rebirth(d, restored)
    return None


def simulate_raw(
    system: RawGroupSpec,
    opts: SimOptions = SimOptions(),
    times=None,
    per: float = 1000.0,
    n_runs: int | None = None,
):
    """Event-driven simulation with per-component relative clocks.

    With ``times`` given, estimates the data-loss count per ``per``
    groups by each time over ``n_runs`` independent group histories and
    returns (values, half_widths) arrays; otherwise estimates the mean
    time to data loss as a SimEstimate.
    """
    if times is not None:
        times = np.asarray(times, dtype=float)
        horizon = float(times.max())
        runs = n_runs or opts.max_paths
        hits = np.zeros(times.size, dtype=np.int64)
        for i in range(runs):
            when = _raw_run(system, path_rng(opts.seed, i), horizon)
            if when is not None:
                hits += when <= times
        p_hat = hits / runs
        z = norm.ppf(0.5 + opts.confidence / 2.0)
        hw = z * np.sqrt(p_hat * (1.0 - p_hat) / runs)
        return per * p_hat, per * hw

    def draw(i: int):
        when = _raw_run(system, path_rng(opts.seed, i), math.inf, opts.max_path_length)
        if when is None:
            return 0.0, False
        return when, True

    return _sequential_mean(draw, opts)


# ---------------------------------------------------------------------------
# Fleet-level estimators
# ---------------------------------------------------------------------------


def simulate_min_of_subsystems(
    sub_model,
    n: int,
    n_obs: int,
    opts: SimOptions = SimOptions(),
    target_label: str = "DIL",
) -> SimEstimate:
    """Mean of min(X_1..X_n) over ``n_obs`` observations.

    Each observation simulates every one of the ``n`` independent
    subsystem copies to absorption and keeps the minimum.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    walker = _Walker(sub_model, target_label)

    def draw(i: int):
        best = math.inf
        ok_all = True
        for j in range(n):
            value, ok = walker.sample(path_rng(opts.seed, i * n + j), opts.max_path_length)
            ok_all &= ok
            best = min(best, value)
        return best, ok_all

    eff = replace(opts, max_paths=n_obs, min_paths=min(opts.min_paths, n_obs))
    return _sequential_mean(draw, eff)


class IndependentGroupsModel:
    """Minimal multi-group system: each group is a 2-state unit.

    Useful for fleet measures over independent groups with exponential
    lifetimes; ``repair_rates=None`` makes group failure permanent.
    """

    def __init__(self, rates: Iterable[float], repair_rates: Iterable[float] | None = None):
        self.rates = list(rates)
        self.repairs = list(repair_rates) if repair_rates is not None else None
        if self.repairs is not None and len(self.repairs) != len(self.rates):
            raise ValueError("repair_rates length mismatch")
        self.n_groups = len(self.rates)

    def initial_state(self):
        return (0,) * self.n_groups

    def transitions(self, state):
        for i, s in enumerate(state):
            nxt = list(state)
            if s == 0:
                nxt[i] = 1
                yield self.rates[i], tuple(nxt)
            elif self.repairs is not None:
                nxt[i] = 0
                yield self.repairs[i], tuple(nxt)

    def groups_in_dil(self, state):
        return [i for i, s in enumerate(state) if s == 1]

    def labels_of(self, state):
        return frozenset({"DIL"}) if any(state) else frozenset()


def simulate_k_percent(
    system,
    k: float,
    with_repair: bool,
    opts: SimOptions = SimOptions(),
) -> SimEstimate:
    """Mean first time at which >= ceil(kG/100) groups are in data loss.

    ``system`` exposes ``initial_state`` / ``transitions`` /
    ``groups_in_dil`` and a ``n_groups`` attribute (or group count via
    ``groups``). Without repair, a group that has entered data loss
    counts as lost from then on even if its components recover.
    """
    if not 0.0 < k <= 100.0:
        raise ValueError("k must be in (0,100]")
    n_groups = getattr(system, "n_groups", None)
    if n_groups is None:
        n_groups = len(system.groups)
    threshold = math.ceil(k * n_groups / 100.0)
    if threshold > n_groups:
        raise ValueError("target fraction unreachable")

    cache: dict = {}

    def row(state):
        got = cache.get(state)
        if got is None:
            succ, rates = [], []
            for rate, nxt in system.transitions(state):
                succ.append(nxt)
                rates.append(rate)
            got = (succ, np.cumsum(rates))
            if len(cache) < 500_000:
                cache[state] = got
        return got

    def draw(i: int):
        rng = path_rng(opts.seed, i)
        state = system.initial_state()
        latched: set[int] = set()
        clock = 0.0
        events = 0
        while True:
            current = system.groups_in_dil(state)
            count = len(current) if with_repair else len(latched.union(current))
            if not with_repair:
                latched.update(current)
            if count >= threshold:
                return clock, True
            succ, cum = row(state)
            if not succ:
                return clock, False
            clock += rng.exponential(1.0 / cum[-1])
            state = succ[np.searchsorted(cum, rng.random() * cum[-1])]
            events += 1
            if events > opts.max_path_length:
                return clock, False

    return _sequential_mean(draw, opts)
