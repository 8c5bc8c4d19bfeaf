import math

import numpy as np
import pytest

from raidrel.builder import CorrelationSpec, DiskModelSpec, RebuildSpec, build_raid_ctmc, build_system_ctmc
from raidrel.ctmc import Ctmc, mtta
from raidrel.distributions import ErlangK, ks_exponentiality, sample
from raidrel.hierarchy import (
    DecompositionPlan,
    DiscretizationParams,
    decompose_solve,
    discretized_mean,
    equivalent_component,
    estimate_p,
    independent_scale,
    write_level_report,
)
from raidrel.presets import table3_raid5
from raidrel.simulate import SimOptions, simulate_min_of_subsystems
from raidrel.topology import ComponentSpec, RaidGroup, Topology


def test_equivalent_component_basics():
    assert equivalent_component(10_000.0) == pytest.approx(1e-4, rel=1e-12)
    assert equivalent_component(math.inf) == 0.0
    with pytest.raises(ValueError):
        equivalent_component(0.0)


def test_substitution_exact_for_exponential_subsystems():
    # two independent exponential units: the 2-state equivalents compose
    # to the analytic minimum lifetime
    r1, r2 = 1e-4, 3e-4
    composed = 1.0 / (equivalent_component(1 / r1) + equivalent_component(1 / r2))
    direct = Ctmc(2, [(0, 1, r1 + r2)], [1, 0], {"DIL": [1]})
    assert composed == pytest.approx(mtta(direct), rel=1e-12)


def test_independent_scale():
    assert independent_scale(40_000.0, 20) == pytest.approx(2_000.0)
    with pytest.raises(ValueError):
        independent_scale(100.0, 0)


def test_independent_scale_exact_for_exponential():
    sub = Ctmc(2, [(0, 1, 1e-4)], [1, 0], {"DIL": [1]})
    scaled = independent_scale(mtta(sub), 20)
    est = simulate_min_of_subsystems(sub, 20, 4000, SimOptions(seed=2))
    assert abs(scaled - est.mean) <= 1.5 * est.half_width


def test_independent_scale_fails_for_erlang_subsystem():
    # the scaling rule assumes constant hazard; a 3-stage subsystem breaks
    # it and the goodness-of-fit precondition catches that
    lam = 1e-3
    sub = Ctmc(4, [(0, 1, lam), (1, 2, lam), (2, 3, lam)], [1, 0, 0, 0], {"DIL": [3]})
    scaled = independent_scale(mtta(sub), 20)
    est = simulate_min_of_subsystems(sub, 20, 3000, SimOptions(seed=4))
    assert abs(scaled - est.mean) / est.mean > 0.05
    rng = np.random.default_rng(0)
    draws = sample(ErlangK(3, lam), rng, size=2000)
    _, reject = ks_exponentiality(draws, 0.05)
    assert reject


# -- decomposition -------------------------------------------------------------


def test_levels_one_equals_direct_solve():
    case = table3_raid5(n=4)
    plan = DecompositionPlan(levels=1)
    value, report = decompose_solve(case.topology, plan, case.disk_model, case.rebuild, case.corr)
    direct = mtta(build_system_ctmc(case.topology, case.disk_model, case.rebuild, case.corr))
    assert value == pytest.approx(direct, rel=1e-12)
    assert len(report) == 1


def test_two_level_close_to_direct_on_small_system():
    case = table3_raid5(n=4)
    plan = DecompositionPlan(levels=2)
    value, report = decompose_solve(case.topology, plan, case.disk_model, case.rebuild, case.corr)
    direct = mtta(build_system_ctmc(case.topology, case.disk_model, case.rebuild, case.corr))
    assert value == pytest.approx(direct, rel=0.05)
    assert {r.level for r in report} == {1, 2}
    assert all(r.method == "numeric" for r in report)


def test_three_level_plan_on_sixty_disks():
    # 10 RAID5 groups of 6 disks behind one controller pair; every level
    # must stay well inside the explicit budget
    comps = [
        ComponentSpec("c0", "controller", 604440.0, 0.5),
        ComponentSpec("c1", "controller", 604440.0, 0.5),
        ComponentSpec("x1", "expander", 2560000.0, 0.5),
        ComponentSpec("ic_c0", "interconnect", 200000.0, 0.5),
        ComponentSpec("ic_c1", "interconnect", 200000.0, 0.5),
    ]
    links = [("c0", "ic_c0"), ("ic_c0", "x1"), ("c1", "ic_c1"), ("ic_c1", "x1")]
    containment = []
    groups = []
    for g in range(10):
        enc = f"enc{g}"
        comps.append(ComponentSpec(enc, "enclosure", 28400.0, 0.5))
        members = []
        for i in range(6):
            d = f"d{g}_{i}"
            comps += [
                ComponentSpec(d, "disk", 33 * 8760.0, 30.0),
                ComponentSpec(f"ic_{d}", "interconnect", 200000.0, 0.5),
            ]
            links += [("x1", f"ic_{d}"), (f"ic_{d}", d)]
            containment.append((enc, d))
            members.append(d)
        groups.append(RaidGroup(f"g{g}", "RAID5", tuple(members)))
    topo = Topology(comps, links, groups, containment)
    case_dm = DiskModelSpec.exponential(1 / (33 * 8760.0))
    plan = DecompositionPlan(levels=3, state_budget=1_000_000)
    value, report = decompose_solve(topo, plan, case_dm, RebuildSpec(1 / 30, 0.004))
    assert math.isfinite(value) and value > 0
    assert {r.level for r in report} == {0, 1, 2}
    assert max(r.states for r in report) <= 1_000_000
    # 60 disk leaves + 10 group subsystems + 1 top model
    assert len(report) == 71


def test_level_report_csv(tmp_path):
    case = table3_raid5(n=4)
    _, report = decompose_solve(
        case.topology, DecompositionPlan(levels=2), case.disk_model, case.rebuild, case.corr
    )
    path = tmp_path / "levels.csv"
    write_level_report(path, report)
    lines = path.read_text().splitlines()
    assert lines[0] == "level,subsystem_id,method,value_hr,ci_halfwidth"
    assert len(lines) == len(report) + 1


# -- discretized mean bounds ---------------------------------------------------


def test_discretized_mean_brackets_exponential_min():
    lam, n, step = 1e-4, 20, 175.0
    F = lambda t: 1.0 - math.exp(-lam * t)
    L, U = discretized_mean(F, n, DiscretizationParams(delta=1e-4, step=step))
    true_mean = 1.0 / (n * lam)
    assert L < true_mean < U
    assert U - L <= step * (1 + 1e-12)


def test_discretized_mean_step_function():
    T = 990.0
    F = lambda t: 0.0 if t < T else 1.0
    L, U = discretized_mean(F, 1, DiscretizationParams(delta=1e-4, step=100.0))
    assert L <= T <= U
    assert U - L <= 100.0 * (1 + 1e-12)


def test_discretized_mean_halving_step_halves_width():
    lam, n = 1e-4, 20
    F = lambda t: 1.0 - math.exp(-lam * t)
    L1, U1 = discretized_mean(F, n, DiscretizationParams(step=175.0))
    L2, U2 = discretized_mean(F, n, DiscretizationParams(step=87.5))
    assert (U2 - L2) == pytest.approx((U1 - L1) / 2, rel=0.02)


def test_discretized_mean_brackets_quadrature_oracle():
    # non-exponential survival: bracket checked against direct integration
    from scipy.integrate import quad

    F = lambda t: 1.0 - math.exp(-((t / 800.0) ** 1.5))
    n = 5
    g = lambda t: (1.0 - F(t)) ** n
    oracle, _ = quad(g, 0, 1e5, limit=300)
    L, U = discretized_mean(F, n, DiscretizationParams(step=10.0))
    assert L < oracle < U


def test_discretized_mean_ci_widening():
    lam, n = 1e-4, 20
    F = lambda t: 1.0 - math.exp(-lam * t)
    hw = lambda t: 0.01
    L0, U0 = discretized_mean(F, n, DiscretizationParams(step=175.0))
    L1, U1 = discretized_mean(F, n, DiscretizationParams(step=175.0), F_halfwidth=hw)
    assert L1 < L0 and U1 > U0


def test_discretized_mean_tail_cap_error():
    with pytest.raises(RuntimeError):
        discretized_mean(lambda t: 0.0, 1, DiscretizationParams(step=10.0, max_doublings=5))


# -- correlation estimation ------------------------------------------------------


def _mttdil_of_p(p: float) -> float:
    chain = build_raid_ctmc(
        8,
        "RAID5",
        DiskModelSpec.exponential(1 / (33 * 8760.0)),
        RebuildSpec(1 / 30, 0.004),
        CorrelationSpec(p) if p > 0 else CorrelationSpec(0.0),
    )
    return mtta(chain)


def test_estimate_p_round_trip():
    target = _mttdil_of_p(0.3)
    found = estimate_p(_mttdil_of_p, target, bracket=(0.0, 0.9))
    assert abs(found - 0.3) <= 0.01


def test_estimate_p_boundary():
    target = _mttdil_of_p(0.0)
    found = estimate_p(_mttdil_of_p, target * 0.9999, bracket=(0.0, 0.9))
    assert found == pytest.approx(0.0, abs=0.02)


def test_estimate_p_rejects_out_of_range_target():
    with pytest.raises(ValueError):
        estimate_p(_mttdil_of_p, _mttdil_of_p(0.0) * 2.0, bracket=(0.0, 0.9))


def test_estimate_p_rejects_non_monotone_family():
    with pytest.raises(ValueError):
        estimate_p(lambda p: abs(p - 0.4), 0.2, bracket=(0.0, 0.9))
