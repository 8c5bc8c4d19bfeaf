import math

import numpy as np
import pytest

from raidrel.builder import (
    CorrelationSpec,
    DEFAULT_THREE_STATE,
    DiskModelSpec,
    RebuildSpec,
    SystemModel,
    build_detailed_disk,
    build_raid_ctmc,
    build_system_ctmc,
    ddf_curve,
    default_detailed_spec,
)
from raidrel.ctmc import StateBudgetExceeded, mtta, transient
from raidrel.distributions import PhaseType3
from raidrel.presets import fig1a, fig1b, fig5, table3_raid5

LAM = 1.0 / (33.0 * 8760.0)
REBUILD = RebuildSpec(rebuild_rate=1.0 / 30.0, uer_prob=0.0)
REBUILD_UER = RebuildSpec(rebuild_rate=1.0 / 30.0, uer_prob=0.004)


def _closed_form_raid5(n, lam, mu, h, p):
    # symbolic elimination of the working/degraded/loss chain
    a, b, c = n * lam * (1 - p), n * lam * p, (n - 1) * lam
    denom = 1 - (a / (a + b)) * (mu * (1 - h) / (c + mu))
    return (1 / (a + b) + (a / (a + b)) * (1 / (c + mu))) / denom


def test_aggregate_exponential_matches_closed_form():
    chain = build_raid_ctmc(4, "RAID5", DiskModelSpec.exponential(LAM), REBUILD)
    assert mtta(chain) == pytest.approx(_closed_form_raid5(4, LAM, 1 / 30, 0.0, 0.0), rel=1e-10)


def test_aggregate_with_uer_and_correlation_matches_closed_form():
    corr = CorrelationSpec(0.25)
    chain = build_raid_ctmc(6, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER, corr)
    assert mtta(chain) == pytest.approx(
        _closed_form_raid5(6, LAM, 1 / 30, 0.004, 0.25), rel=1e-10
    )


def test_forced_correlation_kills_on_first_event():
    corr = CorrelationSpec(1.0 - 1e-12)
    chain = build_raid_ctmc(4, "RAID5", DiskModelSpec.exponential(LAM), REBUILD, corr)
    assert mtta(chain) == pytest.approx(1 / (4 * LAM), rel=1e-6)


def test_p_zero_reduces_transition_for_transition():
    with_p = build_raid_ctmc(
        5, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER, CorrelationSpec(0.0)
    )
    without = build_raid_ctmc(5, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER)
    a, b = with_p.rate_matrix().tocoo(), without.rate_matrix().tocoo()
    assert (a != b).nnz == 0


def test_mtta_monotone_in_p_and_uer():
    values_p = []
    for p in np.arange(0.0, 0.95, 0.1):
        chain = build_raid_ctmc(
            8, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER, CorrelationSpec(float(p))
        )
        values_p.append(mtta(chain))
    assert all(x > y for x, y in zip(values_p, values_p[1:]))
    values_h = []
    for h in (0.0, 0.002, 0.01, 0.05):
        chain = build_raid_ctmc(
            8, "RAID5", DiskModelSpec.exponential(LAM), RebuildSpec(1 / 30, h)
        )
        values_h.append(mtta(chain))
    assert all(x > y for x, y in zip(values_h, values_h[1:]))


def test_mtta_monotone_in_disk_rate():
    values = [
        mtta(build_raid_ctmc(6, "RAID5", DiskModelSpec.exponential(LAM * k), REBUILD))
        for k in (0.5, 1.0, 2.0, 4.0)
    ]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_aggregate_and_product_forms_agree():
    for p in (0.0, 0.3):
        corr = CorrelationSpec(p)
        agg = build_raid_ctmc(5, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER, corr)
        prod = build_raid_ctmc(
            5, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER, corr, form="product"
        )
        assert mtta(prod) == pytest.approx(mtta(agg), rel=1e-9)


def test_raid6_second_tier():
    # two losses survivable, third fatal; uer split only on the deep rebuild
    chain = build_raid_ctmc(8, "RAID6", DiskModelSpec.exponential(LAM), REBUILD_UER)
    r5 = build_raid_ctmc(8, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER)
    assert mtta(chain) > 50 * mtta(r5)


def test_invalid_levels_and_sizes():
    with pytest.raises(ValueError):
        build_raid_ctmc(2, "RAID6", DiskModelSpec.exponential(LAM), REBUILD)
    with pytest.raises(ValueError):
        build_raid_ctmc(4, "RAID9", DiskModelSpec.exponential(LAM), REBUILD)
    with pytest.raises(ValueError):
        build_raid_ctmc(1, "RAID5", DiskModelSpec.exponential(LAM), REBUILD, CorrelationSpec(0.5))


def test_three_state_with_equal_rates_reduces_to_exponential():
    # alpha == beta makes the burn-in phase irrelevant
    phase = PhaseType3(sigma=1e-4, alpha=LAM, beta=LAM)
    three = build_raid_ctmc(4, "RAID5", DiskModelSpec.three_state(phase), REBUILD_UER)
    expo = build_raid_ctmc(4, "RAID5", DiskModelSpec.exponential(LAM), REBUILD_UER)
    assert mtta(three) == pytest.approx(mtta(expo), rel=1e-8)


def test_three_state_infant_mortality_hurts():
    hot = build_raid_ctmc(6, "RAID5", DiskModelSpec.three_state(), REBUILD_UER)
    beta_only = build_raid_ctmc(
        6, "RAID5", DiskModelSpec.exponential(DEFAULT_THREE_STATE.beta), REBUILD_UER
    )
    assert mtta(hot) < mtta(beta_only)


# -- detailed model ----------------------------------------------------------


def test_detailed_fragment_reduces_to_ttop_law():
    spec = DiskModelSpec.detailed(ttld_rate=0.0)
    frag = build_detailed_disk(spec)
    ttop = spec.ttop
    assert mtta(frag, "FAIL") == pytest.approx(ttop.raw_moment(1), rel=1e-9)
    for t in (1e4, 1e5, 1e6):
        absorbed = transient(frag, t)[list(frag.states_with("FAIL"))].sum()
        assert absorbed == pytest.approx(float(ttop.cdf(t)), abs=1e-8)


def test_detailed_fragment_mean_time_to_failure():
    spec = default_detailed_spec()
    frag = build_detailed_disk(spec)
    # failure arcs run from the clean phases, so the mean sits slightly
    # above the moment-matched value (defect dwell is failure-quiet)
    assert mtta(frag, "FAIL") == pytest.approx(4.43e5, rel=0.02)


def test_detailed_fragment_stationary_defect_fraction():
    spec = default_detailed_spec()
    frag = build_detailed_disk(spec, absorb_on_failure=False)
    scrub_mean = 3.0 / spec.ttscr.lam
    renewal = scrub_mean / (scrub_mean + 9259.0)
    pi = transient(frag, 3e5)
    defect_mass = pi[list(frag.states_with("DEFECT"))].sum()
    live = 1.0 - pi[list(frag.states_with("FAIL"))].sum()
    assert defect_mass / live == pytest.approx(renewal, rel=0.02)


def test_detailed_raid5_state_count_and_ddf_start():
    chain = build_raid_ctmc(6, "RAID5", default_detailed_spec())
    assert chain.n == 4093
    curve = ddf_curve(chain, [0.0, 8760.0], per=1000.0)
    assert curve[0] == 0.0
    assert curve[1] > 1.0


def test_detailed_rejects_bad_specs():
    with pytest.raises(ValueError):
        DiskModelSpec(variant="detailed")
    with pytest.raises(ValueError):
        build_detailed_disk(DiskModelSpec.exponential(LAM))


def test_ddf_curve_rejects_unsorted_times():
    chain = build_raid_ctmc(4, "RAID5", DiskModelSpec.exponential(LAM), REBUILD)
    with pytest.raises(ValueError):
        ddf_curve(chain, [2.0, 1.0])


# -- whole-system models -------------------------------------------------------


def test_fig1a_system_is_enclosure_dominated():
    case = fig1a()
    chain = build_system_ctmc(case.topology, case.disk_model, case.rebuild)
    value = mtta(chain)
    assert math.isfinite(value)
    assert value < 28_400.0


def test_fig1b_single_enclosure_failure_reaches_loss():
    # with 2+2 spanning, each enclosure holds f+1 members, so one
    # enclosure event lands in the absorbing state directly
    case = fig1b()
    chain = build_system_ctmc(case.topology, case.disk_model, case.rebuild)
    model = SystemModel(case.topology, case.disk_model, case.rebuild)
    state = list(model.initial_state())
    enc = model.index["enc1"]
    state[enc] = 1
    assert "DIL" in model.labels_of(tuple(state))
    assert mtta(chain) < 28_400.0


def test_spanning_helps_when_no_enclosure_holds_all():
    one = fig1a()
    two = fig1b()
    v1 = mtta(build_system_ctmc(one.topology, one.disk_model, one.rebuild))
    v2 = mtta(build_system_ctmc(two.topology, two.disk_model, two.rebuild))
    # 2+2 spanning keeps every enclosure above the tolerance, so a single
    # enclosure failure still kills the group; the extra daisy hardware
    # only adds failure paths
    assert v2 < v1


def test_system_with_correlation_is_worse():
    base = table3_raid5(n=4)
    corr = table3_raid5(n=4, p=0.3)
    plain = mtta(build_system_ctmc(base.topology, base.disk_model, base.rebuild, base.corr))
    hot = mtta(build_system_ctmc(corr.topology, corr.disk_model, corr.rebuild, corr.corr))
    # the enclosure still dominates at system level, so the correlated
    # double-failure route costs percent-level lifetime, not orders
    assert hot < 0.95 * plain


def test_system_budget_exceeded():
    case = fig5(multipath=False)
    with pytest.raises(StateBudgetExceeded):
        build_system_ctmc(case.topology, case.disk_model, case.rebuild, state_budget=2000)


def test_system_rejects_detailed_disks():
    case = fig1a()
    with pytest.raises(ValueError):
        SystemModel(case.topology, default_detailed_spec(), case.rebuild)
