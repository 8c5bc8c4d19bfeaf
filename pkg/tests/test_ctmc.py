import math

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad

from raidrel.ctmc import (
    Ctmc,
    SolveOptions,
    StateBudgetExceeded,
    absorption_probability,
    explore,
    merge_absorbing,
    mtta,
    transient,
    transient_curve,
)


def _single(rate=1e-3):
    return Ctmc(2, [(0, 1, rate)], [1, 0], {"DIL": [1]})


def _random_absorbing(rng, n, density=0.25, absorb_rate=0.02):
    transitions = []
    for i in range(n - 1):
        for j in range(n):
            if i != j and rng.random() < density:
                transitions.append((i, j, float(rng.exponential(0.5))))
        transitions.append((i, n - 1, absorb_rate * float(rng.random()) + 1e-3))
    return Ctmc(n, transitions, [1.0] + [0.0] * (n - 1), {"DIL": [n - 1]})


def test_mtta_single_transition():
    assert mtta(_single(1e-3)) == pytest.approx(1000.0, rel=1e-12)


def test_mtta_two_stage_chain():
    n, lam = 5, 2e-4
    c = Ctmc(3, [(0, 1, n * lam), (1, 2, (n - 1) * lam)], [1, 0, 0], {"DIL": [2]})
    assert mtta(c) == pytest.approx(1 / (n * lam) + 1 / ((n - 1) * lam), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_mtta_matches_hand_eliminated_repair_model(seed):
    # working -> degraded -> loss with repair and rebuild-failure splits,
    # against symbolic elimination of the 3-state chain
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    lam = float(rng.uniform(1e-6, 1e-3))
    mu = float(rng.uniform(0.01, 1.0))
    h = float(rng.uniform(0.0, 0.05))
    p = float(rng.uniform(0.0, 0.3))
    a, b, c_rate = n * lam * (1 - p), n * lam * p, (n - 1) * lam
    chain = Ctmc(
        3,
        [
            (0, 1, a),
            *( [(0, 2, b)] if b > 0 else [] ),
            (1, 2, c_rate + mu * h),
            (1, 0, mu * (1 - h)),
        ],
        [1, 0, 0],
        {"DIL": [2]},
    )
    denom = 1 - (a / (a + b)) * (mu * (1 - h) / (c_rate + mu))
    closed = (1 / (a + b) + (a / (a + b)) * (1 / (c_rate + mu))) / denom
    assert mtta(chain) == pytest.approx(closed, rel=1e-10)


def test_mtta_unreachable_target_is_infinite():
    c = Ctmc(3, [(0, 1, 0.5), (0, 2, 0.5)], [1, 0, 0], {"DIL": [2]})
    assert mtta(c) == math.inf


def test_mtta_unknown_label():
    with pytest.raises(KeyError):
        mtta(_single(), "NOPE")


def test_transient_exponential_absorption():
    lam = 1e-3
    c = _single(lam)
    for t in (0.0, 100.0, 2500.0):
        assert absorption_probability(c, t) == pytest.approx(1 - math.exp(-lam * t), abs=1e-9)


def test_transient_erlang_absorption_cdf():
    lam = 0.05
    c = Ctmc(4, [(0, 1, lam), (1, 2, lam), (2, 3, lam)], [1, 0, 0, 0], {"DIL": [3]})
    from raidrel.distributions import ErlangK

    erl = ErlangK(3, lam)
    for t in (5.0, 40.0, 130.0):
        assert absorption_probability(c, t) == pytest.approx(float(erl.cdf(t)), abs=1e-9)


def test_transient_conserves_mass():
    rng = np.random.default_rng(3)
    c = _random_absorbing(rng, 30)
    for t in (0.1, 5.0, 80.0):
        assert transient(c, t).sum() == pytest.approx(1.0, abs=1e-9)


def test_transient_rejects_negative_time():
    with pytest.raises(ValueError):
        transient(_single(), -1.0)


def test_absorption_probability_monotone():
    rng = np.random.default_rng(9)
    c = _random_absorbing(rng, 20)
    times = np.linspace(0, 200, 25)
    probs = [absorption_probability(c, t) for t in times]
    assert probs[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(probs) >= -1e-10)


def test_uniformization_matches_dense_expm():
    rng = np.random.default_rng(17)
    c = _random_absorbing(rng, 15)
    q = np.zeros((15, 15))
    coo = c.rate_matrix().tocoo()
    for i, j, r in zip(coo.row, coo.col, coo.data):
        q[i, j] += r
    np.fill_diagonal(q, -q.sum(axis=1))
    for t in (0.5, 7.0, 60.0):
        via_unif = transient(c, t)
        via_expm = c.initial @ scipy.linalg.expm(q * t)
        assert np.abs(via_unif - via_expm).max() < 1e-8


def test_mtta_matches_survival_quadrature():
    rng = np.random.default_rng(23)
    c = _random_absorbing(rng, 25)
    value = mtta(c)

    def survival(t):
        return 1.0 - absorption_probability(c, t)

    oracle, _ = quad(survival, 0.0, 60.0 * value, limit=300)
    assert value == pytest.approx(oracle, rel=1e-3)


def test_transient_curve_incremental_equals_direct():
    rng = np.random.default_rng(31)
    c = _random_absorbing(rng, 12)
    times = np.array([1.0, 4.0, 9.0, 30.0])
    rows = transient_curve(c, times)
    for t, row in zip(times, rows):
        assert np.abs(row - transient(c, t)).max() < 1e-8


def test_merge_absorbing_preserves_measures():
    c = Ctmc(
        4,
        [(0, 1, 0.1), (0, 2, 0.2), (0, 3, 0.3), (1, 0, 2.0)],
        [1, 0, 0, 0],
        {"DIL": [2, 3]},
    )
    merged = merge_absorbing(c)
    assert merged.n == 3
    assert mtta(merged) == pytest.approx(mtta(c), rel=1e-12)
    for t in (1.0, 10.0):
        assert absorption_probability(merged, t) == pytest.approx(
            absorption_probability(c, t), abs=1e-9
        )


def test_merge_absorbing_no_labels_is_identity():
    c = _single()
    assert merge_absorbing(c, "OTHER") is c


def test_merge_absorbing_random_model_curves():
    rng = np.random.default_rng(41)
    n = 50
    transitions = []
    for i in range(n - 2):
        for j in range(n):
            if i != j and rng.random() < 0.15:
                transitions.append((i, j, float(rng.exponential(0.3))))
        transitions.append((i, n - 2 + int(rng.random() < 0.5), 0.01))
    c = Ctmc(n, transitions, [1.0] + [0.0] * (n - 1), {"DIL": [n - 2, n - 1]})
    merged = merge_absorbing(c)
    for t in (1.0, 20.0, 150.0):
        assert absorption_probability(merged, t) == pytest.approx(
            absorption_probability(c, t), abs=1e-9
        )


def test_merge_absorbing_rejects_live_states():
    c = Ctmc(2, [(0, 1, 1.0), (1, 0, 1.0)], [1, 0], {"DIL": [1]})
    with pytest.raises(ValueError):
        merge_absorbing(c)


def test_ctmc_validation():
    with pytest.raises(ValueError):
        Ctmc(2, [(0, 0, 1.0)], [1, 0])
    with pytest.raises(ValueError):
        Ctmc(2, [(0, 1, -1.0)], [1, 0])
    with pytest.raises(ValueError):
        Ctmc(2, [(0, 1, 1.0)], [0.7, 0.7])


def test_parallel_transitions_coalesce():
    c = Ctmc(2, [(0, 1, 0.4), (0, 1, 0.6)], [1, 0], {"DIL": [1]})
    assert c.n_transitions == 1
    assert mtta(c) == pytest.approx(1.0, rel=1e-12)


def test_explore_budget_and_sink_merge():
    def transitions_of(state):
        yield 1.0, state + 1
        if state > 0:
            yield 0.5, -1  # absorbing family, merged into one sink

    def labels_of(state):
        return frozenset({"DIL"}) if state < 0 else frozenset()

    with pytest.raises(StateBudgetExceeded):
        explore([(0, 1.0)], transitions_of, labels_of, state_budget=50)


def test_to_csv(tmp_path):
    c = _single(0.25)
    path = tmp_path / "chain.csv"
    c.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "from,to,rate"
    assert lines[1] == "0,1,0.25"
