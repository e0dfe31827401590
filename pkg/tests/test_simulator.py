"""Match harness: shared randomness, determinism, and result plumbing."""

import csv
import dataclasses

import numpy as np
import pytest

from seqmodel.baselines import KUHN_GAME_VALUE, ResponseKind, best_response
from seqmodel.games import build_kuhn
from seqmodel.posterior import (
    ObservationLog,
    append_observation,
    neg_log_posterior,
    uniform_prior,
)
from seqmodel.sequence_form import (
    behavioral_to_realization,
    derive,
    expected_payoff,
    uniform_plan,
)
from seqmodel.simulator import (
    ALL_ALGORITHMS,
    MatchConfig,
    _mode_polish,
    aggregate,
    config_from_manifest,
    draw_opponent,
    draw_samples,
    run_experiment,
    run_match,
    run_opponent,
    shared_randomness,
    write_aggregate_csv,
    write_manifest,
    write_records_csv,
)
from seqmodel.solver import estimate

MODELING = (ResponseKind.FMAP, ResponseKind.BBR, ResponseKind.MAP,
            ResponseKind.THOMPSON)


@pytest.fixture(scope="module")
def kuhn_pair():
    tree, obs = build_kuhn()
    return derive(tree), obs


def tiny(**overrides):
    base = dict(iterations=20, opponents=2, samples=4, seed=7)
    base.update(overrides)
    return MatchConfig(**base)


def test_defaults_are_the_benchmark_settings():
    cfg = MatchConfig()
    assert cfg.game == "kuhn"
    assert cfg.iterations == 3000
    assert cfg.opponents == 100
    assert cfg.samples == 10
    assert cfg.alpha == 2.0
    assert cfg.jobs == 1
    assert cfg.algorithms == ALL_ALGORITHMS


def test_config_rejects_bad_values():
    with pytest.raises(ValueError, match="unknown game"):
        MatchConfig(game="chess")
    with pytest.raises(ValueError, match="iterations"):
        MatchConfig(iterations=0)
    with pytest.raises(ValueError, match="opponent count"):
        MatchConfig(opponents=0)
    with pytest.raises(ValueError, match="sample count"):
        MatchConfig(samples=0)
    with pytest.raises(ValueError, match="prior parameter"):
        MatchConfig(alpha=0.5)
    with pytest.raises(ValueError, match="jobs"):
        MatchConfig(jobs=0)
    with pytest.raises(ValueError, match="at least one algorithm"):
        MatchConfig(algorithms=())
    with pytest.raises(ValueError, match="kuhn only"):
        MatchConfig(game="rps", algorithms=(ResponseKind.BEST_NASH,))


def test_config_accepts_algorithm_names_as_strings():
    cfg = MatchConfig(algorithms=("fmap", "bbr"))
    assert cfg.algorithms == (ResponseKind.FMAP, ResponseKind.BBR)


def test_shared_randomness_is_reproducible(kuhn_pair):
    game, _ = kuhn_pair
    cfg = tiny()
    a = shared_randomness(game, cfg, 0)
    b = shared_randomness(game, cfg, 0)
    assert np.array_equal(a.chance, b.chance)
    assert np.array_equal(a.thresholds, b.thresholds)
    assert a.chance.shape == (cfg.iterations,)
    assert a.thresholds.shape == (cfg.iterations, 12)
    other = shared_randomness(game, cfg, 1)
    assert not np.array_equal(a.chance, other.chance)


def test_draw_streams_are_independent_and_stable(kuhn_pair):
    game, _ = kuhn_pair
    cfg = tiny()
    first = draw_opponent(game, cfg, 0)
    again = draw_opponent(game, cfg, 0)
    for u, v in zip(first, again):
        assert np.array_equal(u, v)
    samples = draw_samples(game, cfg, 0)
    repeat = draw_samples(game, cfg, 0)
    assert np.array_equal(samples.plans, repeat.plans)
    # a different master seed moves the opponent draw
    moved = draw_opponent(game, cfg, 0)
    shifted = draw_opponent(game, dataclasses.replace(cfg, seed=8), 0)
    assert not all(np.array_equal(u, v) for u, v in zip(moved, shifted))


def test_same_seed_match_is_bit_identical(kuhn_pair):
    game, obs = kuhn_pair
    cfg = tiny(iterations=30)
    sigma = draw_opponent(game, cfg, 0)
    a = run_match(game, sigma, ResponseKind.FMAP, cfg, 0, obs=obs)
    b = run_match(game, sigma, ResponseKind.FMAP, cfg, 0, obs=obs)
    assert np.array_equal(a.payoff, b.payoff)
    assert np.array_equal(a.model_l2, b.model_l2)


def test_first_iteration_plays_the_uniform_model(kuhn_pair):
    game, obs = kuhn_pair
    cfg = tiny(iterations=1)
    sigma = draw_opponent(game, cfg, 0)
    y_star = behavioral_to_realization(game, 2, sigma)
    response, _ = best_response(game, uniform_plan(game, 2))
    expected = expected_payoff(game, response, y_star)
    reference_dist = np.linalg.norm(uniform_plan(game, 2) - y_star)
    for kind in MODELING:
        series = run_match(game, sigma, kind, cfg, 0, obs=obs)
        assert series.payoff[0] == pytest.approx(expected, abs=1e-12)
        assert series.model_l2[0] == pytest.approx(reference_dist, abs=1e-12)


def test_fixed_strategies_record_constant_series(kuhn_pair):
    game, obs = kuhn_pair
    cfg = tiny()
    sigma = draw_opponent(game, cfg, 1)
    y_star = behavioral_to_realization(game, 2, sigma)
    br = run_match(game, sigma, ResponseKind.BEST_RESPONSE, cfg, 1)
    _, value = best_response(game, y_star)
    assert np.all(br.payoff == value)
    assert np.all(np.isnan(br.model_l2))
    nash = run_match(game, sigma, ResponseKind.BEST_NASH, cfg, 1)
    assert np.all(nash.payoff == nash.payoff[0])
    assert np.all(np.isnan(nash.model_l2))
    # an equilibrium strategy can never fall below the game value
    assert nash.payoff[0] >= KUHN_GAME_VALUE - 1e-9
    assert br.payoff[0] >= nash.payoff[0] - 1e-12


def test_payoffs_stay_inside_the_kuhn_range():
    cfg = tiny(iterations=40)
    for series in run_opponent(cfg, 0):
        assert np.all(series.payoff >= -2.0)
        assert np.all(series.payoff <= 2.0)


def test_single_hand_experiment_shape():
    cfg = tiny(iterations=1, opponents=1)
    series = run_experiment(cfg)
    assert len(series) == len(ALL_ALGORITHMS)
    assert {s.algorithm for s in series} == set(ALL_ALGORITHMS)
    assert all(len(s.payoff) == 1 for s in series)


def test_mode_polish_descends_and_agrees_with_cold_solve(kuhn_pair):
    game, obs = kuhn_pair
    prior = uniform_prior(game, 2, 2.0)
    log = ObservationLog(game)
    rng = np.random.default_rng(3)
    leaf_ids = [leaf.index for leaf in game.tree.leaves]
    for _ in range(40):
        log = append_observation(log, obs, int(rng.choice(leaf_ids)))
    start = uniform_plan(game, 2)
    polished = _mode_polish(game, prior, log, start)
    assert neg_log_posterior(polished, prior, log) <= \
        neg_log_posterior(start, prior, log) + 1e-12
    warmed = estimate(game, prior, log, warm_start=polished).estimate
    cold = estimate(game, prior, log).estimate
    assert np.abs(warmed - cold).max() < 1e-5


def test_records_are_one_based_and_fully_keyed(kuhn_pair):
    game, obs = kuhn_pair
    cfg = tiny(iterations=5)
    sigma = draw_opponent(game, cfg, 0)
    series = run_match(game, sigma, ResponseKind.BBR, cfg, 0, obs=obs)
    rows = list(series.records())
    assert len(rows) == 5
    assert [r.iteration for r in rows] == [1, 2, 3, 4, 5]
    assert all(r.algorithm == "bbr" and r.opponent == 0 for r in rows)
    assert rows[2].expected_payoff == series.payoff[2]


def test_record_csv_round_trips_exact_floats(tmp_path):
    cfg = tiny(iterations=6, algorithms=("fmap", "bestresponse"))
    series = run_experiment(cfg)
    path = tmp_path / "records.csv"
    write_records_csv(path, series)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["algo", "opponent", "iter", "expected_payoff", "model_l2"]
    body = rows[1:]
    assert len(body) == cfg.opponents * len(cfg.algorithms) * cfg.iterations
    flat = [rec for s in series for rec in s.records()]
    for row, rec in zip(body, flat):
        assert row[0] == rec.algorithm
        assert int(row[1]) == rec.opponent
        assert int(row[2]) == rec.iteration
        got = float(row[3])
        assert got == rec.expected_payoff
        if np.isnan(rec.model_l2):
            assert row[4] == "nan"
        else:
            assert float(row[4]) == rec.model_l2


def test_aggregate_is_the_cross_opponent_mean(tmp_path):
    cfg = tiny(iterations=4, opponents=3, algorithms=("bbr", "bestnash"))
    series = run_experiment(cfg)
    table = aggregate(series)
    bbr = [s for s in series if s.algorithm == ResponseKind.BBR]
    assert len(bbr) == 3
    by_hand = np.stack([s.payoff for s in bbr]).mean(axis=0)
    assert np.allclose(table["bbr"][0], by_hand, atol=0)
    assert np.all(np.isnan(table["bestnash"][1]))
    path = tmp_path / "aggregate.csv"
    write_aggregate_csv(path, series)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["algo", "iter", "mean_payoff", "mean_model_l2"]
    assert len(rows) - 1 == len(cfg.algorithms) * cfg.iterations
    first_bbr = next(r for r in rows[1:] if r[0] == "bbr")
    assert float(first_bbr[2]) == table["bbr"][0][0]


def test_manifest_round_trip(tmp_path):
    cfg = tiny(iterations=9, algorithms=("fmap", "thompson"), jobs=2)
    path = tmp_path / "manifest.json"
    write_manifest(path, cfg)
    assert config_from_manifest(path) == cfg


def test_parallel_and_serial_runs_agree():
    serial = tiny(iterations=10, algorithms=("fmap", "bbr", "bestresponse"))
    parallel = dataclasses.replace(serial, jobs=2)
    a = run_experiment(serial)
    b = run_experiment(parallel)
    assert len(a) == len(b)
    for s, p in zip(a, b):
        assert s.algorithm == p.algorithm
        assert s.opponent == p.opponent
        np.testing.assert_array_equal(s.payoff, p.payoff)
        np.testing.assert_array_equal(s.model_l2, p.model_l2)
