import numpy as np
import pytest
from hypothesis import given, settings

from cgbg import (
    CGBG,
    CapacityError,
    InvalidArgument,
    PayoffComponent,
    alt_max,
    brute_force,
    cross_entropy,
    evaluate_policy,
    gen_random_cgbg,
    is_fixed_point,
    solve_ndp,
)
from cgbg.factor_graph import build_ati_fg
from oracles import close, make_game, oracle_optimum, small_games


def test_brute_force_single_type():
    game = CGBG(1, [3], [1], [PayoffComponent((0,), [1.0], [1.0, 9.0, 4.0])])
    res = brute_force(game)
    assert res.policy == ((1,),) and res.value == 9.0 and res.n_policies == 3


def test_brute_force_zero_game_prefers_smallest_policy():
    game = make_game(np.random.default_rng(0), 3, [(0, 1), (1, 2)], 2, 2)
    zero = CGBG(
        3,
        game.action_sizes,
        game.type_sizes,
        [PayoffComponent(c.scope, c.local_type_prob, np.zeros(c.payoff.size)) for c in game.components],
    )
    res = brute_force(zero)
    assert res.policy == ((0, 0), (0, 0), (0, 0)) and res.value == 0.0


def test_brute_force_cap():
    game = gen_random_cgbg(4, 2, 2, 2, seed=0)
    with pytest.raises(CapacityError, match="256"):
        brute_force(game, cap=255)


@given(small_games())
@settings(max_examples=40, deadline=None)
def test_brute_force_matches_oracle(game):
    res = brute_force(game)
    assert close(res.value, oracle_optimum(game))
    assert res.value == evaluate_policy(game, res.policy)


def test_brute_force_agrees_with_ndp_on_100_games():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        game = gen_random_cgbg(n, 2, int(rng.integers(2, 4)), int(rng.integers(2, 4)), seed)
        assert close(brute_force(game).value, solve_ndp(build_ati_fg(game)[0]).value)


def test_alt_max_single_agent_one_round():
    game = make_game(np.random.default_rng(3), 1, [(0,)], 4, 3)
    res = alt_max(game, seed=0)
    assert close(res.value, brute_force(game).value)
    # one improving sweep plus the sweep that confirms the fixed point
    assert res.rounds <= 2
    assert res.converged


@pytest.mark.parametrize("seed", range(10))
def test_alt_max_fixed_point_and_monotone(seed):
    game = gen_random_cgbg(5, 2, 3, 2, seed)
    res = alt_max(game, seed=seed)
    assert res.converged and is_fixed_point(game, res.policy)
    assert np.all(np.diff(res.trace) >= 0)
    assert res.value == evaluate_policy(game, res.policy) == res.trace[-1]


def test_alt_max_near_optimum_over_seeds():
    game = gen_random_cgbg(5, 2, 2, 2, seed=11)
    optimum = brute_force(game).value
    values = [alt_max(game, seed=s).value for s in range(20)]
    assert max(values) <= optimum + 1e-12
    assert max(values) >= 0.95 * optimum


def test_alt_max_round_limit():
    game = gen_random_cgbg(6, 2, 3, 3, seed=2)
    res = alt_max(game, seed=0, max_rounds=1)
    assert res.rounds == 1
    with pytest.raises(InvalidArgument):
        alt_max(game, max_rounds=0)


def test_cross_entropy_bandit():
    game = CGBG(1, [5], [1], [PayoffComponent((0,), [1.0], [0.1, 0.4, -1.0, 0.9, 0.3])])
    res = cross_entropy(game, seed=0)
    assert res.policy == ((3,),) and res.value == 0.9


@pytest.mark.parametrize("seed", range(5))
def test_cross_entropy_bounded_and_monotone(seed):
    game = gen_random_cgbg(5, 2, 2, 2, seed)
    res = cross_entropy(game, seed=seed, iterations=20)
    assert np.all(np.diff(res.best_trace) >= 0)
    assert res.value == evaluate_policy(game, res.policy)
    assert res.value <= brute_force(game).value + 1e-12


def test_cross_entropy_handles_mixed_action_sizes():
    game = make_game(np.random.default_rng(1), 3, [(0, 1), (1, 2)], [1, 3, 2], [2, 1, 3])
    res = cross_entropy(game, seed=0, iterations=10)
    assert res.value == evaluate_policy(game, res.policy)


def test_cross_entropy_validation():
    game = gen_random_cgbg(2, 2, 2, 2, seed=0)
    for kwargs in (dict(population=0), dict(iterations=0), dict(elite_fraction=0.0), dict(smoothing=1.5)):
        with pytest.raises(InvalidArgument):
            cross_entropy(game, **kwargs)


def test_seeded_baselines_are_deterministic():
    game = gen_random_cgbg(6, 2, 3, 3, seed=5)
    assert alt_max(game, seed=3) == alt_max(game, seed=3)
    assert cross_entropy(game, seed=3, iterations=10) == cross_entropy(game, seed=3, iterations=10)


@pytest.mark.parametrize("seed", range(5))
def test_brute_force_dominates(seed):
    game = gen_random_cgbg(4, 2, 2, 2, seed)
    best = brute_force(game).value
    assert alt_max(game, seed=seed).value <= best
    assert cross_entropy(game, seed=seed, iterations=10).value <= best
