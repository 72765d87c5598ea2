"""Metropolis fiber walk: chain mechanics, estimators, stationarity."""

import math

import numpy as np
import pytest

from markovfiber.fiber import enumerate_fiber, exact_pvalue
from markovfiber.mcmc import (
    ChainConfig,
    ChainResult,
    estimate_pvalue,
    max_threads,
    pooled_pvalue,
    run_chains,
    walk,
)
from markovfiber.models import INDEPENDENCE, ModelSpec
from markovfiber.moves import basis_for_model
from markovfiber.tables import Table, build_configuration, sufficient_statistic
from markovfiber.datasets import gilby_model, gilby_table


def indep_setup(rows):
    model = ModelSpec(family=INDEPENDENCE)
    table = Table.from_rows(rows)
    cfg = build_configuration(model, table.R, table.C)
    basis = basis_for_model(model, table.R, table.C)
    return table, cfg, basis


def test_chain_config_validation():
    basis = basis_for_model(ModelSpec(family=INDEPENDENCE), 2, 2)
    with pytest.raises(ValueError):
        ChainConfig(steps=0, proposal=basis)
    with pytest.raises(ValueError):
        ChainConfig(steps=10, burn_in=10, proposal=basis)
    with pytest.raises(ValueError):
        ChainConfig(steps=10, thin=0, proposal=basis)
    with pytest.raises(ValueError):
        ChainConfig(steps=10)  # no proposal


def test_walk_rejects_mismatched_basis():
    table, cfg, _ = indep_setup([[1, 0], [0, 1]])
    wrong = basis_for_model(ModelSpec(family=INDEPENDENCE), 3, 3)
    with pytest.raises(ValueError):
        walk(table, cfg, ChainConfig(steps=10, proposal=wrong), lambda a: 0.0)


def test_walk_rejects_non_finite_statistic():
    table, cfg, basis = indep_setup([[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        walk(table, cfg, ChainConfig(steps=10, proposal=basis),
             lambda a: float("nan"))


def test_step_accounting_and_sample_length():
    table, cfg, basis = indep_setup([[2, 1], [1, 2]])
    chain = ChainConfig(steps=1000, burn_in=100, thin=7, seed=5, proposal=basis)
    res = walk(table, cfg, chain, lambda a: float(a[0, 0]))
    assert res.accept_count + res.stay_count + res.reject_count == 1000
    assert len(res.samples) == math.ceil((1000 - 100) / 7)
    assert res.steps == 1000 and res.seed == 5
    assert 0.0 <= res.acceptance_rate <= 1.0


def test_walk_is_deterministic_per_seed():
    table, cfg, basis = indep_setup([[2, 1], [1, 2]])
    stat = lambda a: float(a[0, 0])
    a = walk(table, cfg, ChainConfig(steps=2000, seed=42, proposal=basis), stat)
    b = walk(table, cfg, ChainConfig(steps=2000, seed=42, proposal=basis), stat)
    c = walk(table, cfg, ChainConfig(steps=2000, seed=43, proposal=basis), stat)
    assert np.array_equal(a.samples, b.samples)
    assert a.accept_count == b.accept_count
    assert not np.array_equal(a.samples, c.samples)


def test_estimate_pvalue_add_one_formula():
    assert estimate_pvalue([1.0, 2.0, 3.0], 2.0) == pytest.approx(3 / 4)
    assert estimate_pvalue([1.0, 2.0, 3.0], 9.9) == pytest.approx(1 / 4)
    assert estimate_pvalue([1.0], 0.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        estimate_pvalue([], 1.0)


def test_run_chains_seeds_and_independence():
    table, cfg, basis = indep_setup([[2, 1], [1, 2]])
    chain = ChainConfig(steps=500, seed=7, proposal=basis)
    results = run_chains(table, cfg, chain, lambda a: float(a[0, 0]), n_chains=3)
    assert [r.seed for r in results] == [7, 8, 9]
    solo = walk(table, cfg, ChainConfig(steps=500, seed=8, proposal=basis),
                lambda a: float(a[0, 0]))
    assert np.array_equal(results[1].samples, solo.samples)
    with pytest.raises(ValueError):
        run_chains(table, cfg, chain, lambda a: 0.0, n_chains=0)


def fake_result(samples, observed=0.0):
    arr = np.asarray(samples, dtype=np.float64)
    return ChainResult(samples=arr, accept_count=0, stay_count=0,
                       reject_count=len(arr), observed=observed,
                       pvalue=estimate_pvalue(arr, observed), seed=0,
                       steps=len(arr))


def test_pooled_pvalue_between_chains():
    rs = [fake_result([1, 1, 0, 1], observed=0.5),
          fake_result([1, 0, 0, 1], observed=0.5)]
    p, se = pooled_pvalue(rs)
    ps = [r.pvalue for r in rs]
    assert p == pytest.approx(sum(ps) / 2)
    assert se == pytest.approx(np.std(ps, ddof=1) / math.sqrt(2))


def test_pooled_pvalue_single_chain_batches():
    samples = np.tile(np.array([3.0, 1.0]), 40)  # 80 samples, half >= 2
    r = fake_result(samples, observed=2.0)
    p, se = pooled_pvalue([r])
    assert p == r.pvalue
    ind = (samples >= 2.0).astype(float)
    means = np.array([b.mean() for b in np.array_split(ind, 20)])
    assert se == pytest.approx(np.std(means, ddof=1) / math.sqrt(20))
    with pytest.raises(ValueError):
        pooled_pvalue([])


def test_max_threads_env(monkeypatch):
    monkeypatch.setenv("MARKOV_FIBER_THREADS", "3")
    assert max_threads() == 3
    monkeypatch.setenv("MARKOV_FIBER_THREADS", "zero")
    with pytest.raises(ValueError):
        max_threads()
    monkeypatch.setenv("MARKOV_FIBER_THREADS", "0")
    with pytest.raises(ValueError):
        max_threads()
    monkeypatch.delenv("MARKOV_FIBER_THREADS")
    assert max_threads() >= 1


def test_two_state_fiber_occupancy_is_even():
    table, cfg, basis = indep_setup([[1, 0], [0, 1]])
    t = sufficient_statistic(table, cfg)
    fib = enumerate_fiber(t, cfg)
    assert len(fib) == 2  # both weights are 1
    res = walk(table, cfg,
               ChainConfig(steps=100_000, burn_in=5_000, thin=10, seed=2,
                           proposal=basis),
               lambda a: float(a[0, 0]))
    share = float((res.samples >= 0.5).mean())
    n = len(res.samples)
    assert abs(share - 0.5) < 3 * math.sqrt(0.25 / n)


def test_sampler_pvalue_matches_exact_on_small_fiber():
    table, cfg, basis = indep_setup([[2, 0], [0, 1]])

    def stat(arr):
        return float(arr[0, 0])

    p_exact = exact_pvalue(table, cfg, stat)
    assert p_exact == pytest.approx(1 / 3)
    res = walk(table, cfg,
               ChainConfig(steps=200_000, burn_in=10_000, thin=10, seed=3,
                           proposal=basis), stat)
    _, se = pooled_pvalue([res])
    assert abs(res.pvalue - p_exact) <= 3 * max(se, 1e-4)


def test_gilby_chain_leaves_the_observed_statistic_behind():
    # the observed table is far out in the tail, so the chain should
    # essentially never revisit values that extreme
    table = gilby_table()
    model = gilby_model()
    cfg = build_configuration(model, 8, 4)
    basis = basis_for_model(model, 8, 4)
    from markovfiber.fit import make_tracker

    tracker = make_tracker("chi2", table, model)
    res = walk(table, cfg,
               ChainConfig(steps=20_000, burn_in=2_000, proposal=basis), tracker)
    assert res.pvalue < 0.01
    assert res.observed == pytest.approx(153.66942307412367, abs=1e-8)
