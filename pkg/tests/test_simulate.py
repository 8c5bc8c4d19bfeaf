import math

import numpy as np
import pytest

from raidrel.builder import CorrelationSpec, DiskModelSpec, RebuildSpec, build_raid_ctmc
from raidrel.ctmc import Ctmc, mtta
from raidrel.distributions import ErlangK, Exponential, Weibull
from raidrel.simulate import (
    IndependentGroupsModel,
    RawGroupSpec,
    SimOptions,
    simulate_k_percent,
    simulate_min_of_subsystems,
    simulate_mtta,
    simulate_raw,
)


def _single(rate=1e-3):
    return Ctmc(2, [(0, 1, rate)], [1, 0], {"DIL": [1]})


def test_simulate_mtta_simple_and_deterministic():
    opts = SimOptions(seed=42, max_paths=20_000)
    est = simulate_mtta(_single(1e-3), opts)
    assert est.mean == pytest.approx(1000.0, rel=0.05)
    again = simulate_mtta(_single(1e-3), opts)
    assert again.mean == est.mean
    assert again.half_width == est.half_width
    assert again.n_paths == est.n_paths


def test_ci_calibration_covers_truth():
    # repeated runs; the solver value must land inside the interval at
    # about the nominal confidence (a few points of slack)
    confidence = 0.9
    hits = 0
    trials = 200
    for seed in range(trials):
        est = simulate_mtta(
            _single(2e-2),
            SimOptions(seed=seed, confidence=confidence, min_paths=400, max_paths=400,
                       rel_halfwidth=0.0, batch=400),
        )
        lo, hi = est.interval
        hits += lo <= 50.0 <= hi
    assert hits / trials >= confidence - 0.05


def test_simulate_mtta_agrees_with_solver_on_repair_model():
    chain = build_raid_ctmc(
        4,
        "RAID5",
        DiskModelSpec.exponential(1e-4),
        RebuildSpec(rebuild_rate=1.0 / 30.0, uer_prob=0.01),
        CorrelationSpec(0.0),
    )
    exact = mtta(chain)
    est = simulate_mtta(chain, SimOptions(seed=5, max_paths=30_000, batch=3000))
    assert abs(est.mean - exact) <= 1.5 * est.half_width


def test_half_width_scales_inverse_sqrt():
    def run(n):
        return simulate_mtta(
            _single(1e-2),
            SimOptions(seed=9, min_paths=n, max_paths=n, rel_halfwidth=0.0, batch=n),
        ).half_width

    ratio = run(16_000) / run(8_000)
    assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_truncation_is_flagged():
    # transient dead-end state: paths that stall are reported, not hidden
    c = Ctmc(3, [(0, 1, 1.0), (0, 2, 1.0)], [1, 0, 0], {"DIL": [2]})
    est = simulate_mtta(c, SimOptions(seed=1, max_paths=500, min_paths=500, batch=500))
    assert est.truncated_fraction > 0.3
    assert est.flagged


def test_samples_csv(tmp_path):
    path = tmp_path / "runs.csv"
    simulate_mtta(_single(), SimOptions(seed=3, max_paths=50, min_paths=50, batch=50),
                  samples_csv=path)
    lines = path.read_text().splitlines()
    assert lines[0] == "run_index,value_hr"
    assert len(lines) == 51


# -- raw event simulation ------------------------------------------------------


def test_raw_exponential_reduction_matches_chain():
    spec = RawGroupSpec(n=4, level="RAID5", ttop=Exponential(1e-3), ttr=Exponential(1 / 30))
    est = simulate_raw(spec, SimOptions(seed=3, max_paths=20_000, batch=2000))
    chain = build_raid_ctmc(
        4, "RAID5", DiskModelSpec.exponential(1e-3), RebuildSpec(1 / 30, 0.0)
    )
    exact = mtta(chain)
    assert abs(est.mean - exact) <= 1.5 * est.half_width


def test_raw_ddf_curve_deterministic_and_monotone():
    spec = RawGroupSpec(
        n=6,
        level="RAID5",
        ttop=Weibull(1.12, 461386.0),
        ttr=Weibull(2, 12, 6),
        ttld=Exponential(1 / 9259.0),
        ttscr=Weibull(3, 168, 6),
    )
    times = np.arange(1, 6) * 8760.0
    v1, h1 = simulate_raw(spec, SimOptions(seed=7), times=times, n_runs=5000)
    v2, _ = simulate_raw(spec, SimOptions(seed=7), times=times, n_runs=5000)
    assert np.array_equal(v1, v2)
    assert np.all(np.diff(v1) >= 0)
    assert np.all(h1 >= 0)


def test_raw_erlang_restore_equivalence():
    # Erlang restore law sampled directly versus the equivalent chain with
    # explicit restore stages (independent route: linear solve vs events)
    lam, mu = 5e-4, 0.1
    spec = RawGroupSpec(n=3, level="RAID5", ttop=Exponential(lam), ttr=ErlangK(3, mu))
    est = simulate_raw(spec, SimOptions(seed=21, max_paths=15_000, batch=3000))
    chain = Ctmc(
        5,
        [
            (0, 1, 3 * lam),
            (1, 2, mu), (2, 3, mu), (3, 0, mu),
            (1, 4, 2 * lam), (2, 4, 2 * lam), (3, 4, 2 * lam),
        ],
        [1, 0, 0, 0, 0],
        {"DIL": [4]},
    )
    assert abs(est.mean - mtta(chain)) <= 1.5 * est.half_width


# -- fleet estimators ----------------------------------------------------------


def test_min_of_subsystems_exponential():
    sub = Ctmc(2, [(0, 1, 1e-4)], [1, 0], {"DIL": [1]})
    est = simulate_min_of_subsystems(sub, 20, 4000, SimOptions(seed=5))
    assert abs(est.mean - 500.0) <= 1.5 * est.half_width


def test_min_of_one_equals_plain_mtta():
    sub = _single(1e-3)
    est_min = simulate_min_of_subsystems(sub, 1, 5000, SimOptions(seed=8))
    est = simulate_mtta(sub, SimOptions(seed=8, max_paths=5000, batch=1000))
    assert abs(est_min.mean - est.mean) <= est_min.half_width + est.half_width


def test_k_percent_max_of_exponentials():
    lam = 1e-3
    model = IndependentGroupsModel([lam] * 4)
    est = simulate_k_percent(model, 100.0, with_repair=False,
                             opts=SimOptions(seed=11, max_paths=8000, batch=2000))
    harmonic = sum(1.0 / i for i in range(1, 5)) / lam
    assert abs(est.mean - harmonic) <= 1.5 * est.half_width


def test_k_percent_min_case():
    lam = 1e-3
    model = IndependentGroupsModel([lam] * 2)
    est = simulate_k_percent(model, 50.0, with_repair=False,
                             opts=SimOptions(seed=12, max_paths=8000, batch=2000))
    assert abs(est.mean - 1 / (2 * lam)) <= 1.5 * est.half_width


def test_k_percent_repair_extends_lifetime():
    lam = 1e-3
    with_r = simulate_k_percent(
        IndependentGroupsModel([lam] * 4, repair_rates=[5e-3] * 4),
        100.0,
        with_repair=True,
        opts=SimOptions(seed=13, max_paths=4000, batch=1000),
    )
    without = simulate_k_percent(
        IndependentGroupsModel([lam] * 4, repair_rates=[5e-3] * 4),
        100.0,
        with_repair=False,
        opts=SimOptions(seed=13, max_paths=4000, batch=1000),
    )
    assert with_r.mean > without.mean


def test_k_percent_validates_fraction():
    model = IndependentGroupsModel([1e-3] * 4)
    with pytest.raises(ValueError):
        simulate_k_percent(model, 0.0, with_repair=False)
    with pytest.raises(ValueError):
        simulate_k_percent(model, 120.0, with_repair=False)
