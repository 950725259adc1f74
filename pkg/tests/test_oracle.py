import itertools
import math

import numpy as np
import pytest

from qtmlab import (Discrete, ProblemSpec, SolverConfig, TabularStrategy,
                    oracle_best_response, oracle_equilibrium, oracle_expected_utility,
                    oracle_outcome_distribution, solve_equilibrium)
from qtmlab.oracle import OracleConfig

from conftest import two_type_dist


def test_oracle_expected_utility_matches_manual_enumeration():
    dist = two_type_dist()
    spec = ProblemSpec(m=2, n=2, c=1.0)
    votes = np.array([[0.1, -0.1], [-0.2, 0.2]])
    strat = TabularStrategy(dist.atoms.copy(), votes)
    u = np.array([1.0, 0.0])
    a = np.array([0.15, -0.05])
    got = oracle_expected_utility(u, a, strat, spec, dist)
    expect = 0.0
    for t, w in [(0, 0.5), (1, 0.5)]:
        tot = a + votes[t]
        q1 = math.exp(tot[0]) / (math.exp(tot[0]) + math.exp(tot[1]))
        rebate = float(votes[t] @ votes[t])  # c/(n-1) = 1
        expect += w * (q1 * 1.0 - (a @ a) + rebate)
    assert got == pytest.approx(expect, abs=1e-12)


def test_oracle_best_response_beats_neighbors():
    dist = two_type_dist()
    spec = ProblemSpec(m=2, n=2, c=1.0)
    strat = TabularStrategy(dist.atoms.copy(), np.array([[0.1, -0.1], [-0.1, 0.1]]))
    u = np.array([1.0, 0.0])
    cfg = OracleConfig(grid_points_per_axis=101, refinement_rounds=2)
    best = oracle_best_response(u, strat, spec, dist, cfg)
    v0 = oracle_expected_utility(u, best, strat, spec, dist)
    for da in itertools.product([-0.002, 0.0, 0.002], repeat=2):
        if da == (0.0, 0.0):
            continue
        v = oracle_expected_utility(u, best + np.array(da), strat, spec, dist)
        assert v <= v0 + 1e-10


def test_oracle_equilibrium_matches_solver_small():
    dist = two_type_dist()
    spec = ProblemSpec(m=2, n=2, c=1.0)
    solver = solve_equilibrium(spec, dist, SolverConfig(seed=0))
    strat, report = oracle_equilibrium(spec, dist)
    assert report.converged and not report.cycling
    assert np.abs(strat.votes - solver.strategy.votes).max() < 1e-3


def test_oracle_constant_type_is_zero():
    dist = Discrete(probs=np.array([1.0]), atoms=np.array([[0.5, 0.5]]))
    spec = ProblemSpec(m=2, n=2, c=1.0)
    strat = TabularStrategy(dist.atoms.copy(), np.zeros((1, 2)))
    best = oracle_best_response(np.array([0.5, 0.5]), strat, spec, dist)
    assert np.all(best == 0.0)


def test_oracle_outcome_distribution_sums_to_one():
    dist = two_type_dist()
    spec = ProblemSpec(m=2, n=3, c=1.0)
    strat, _ = oracle_equilibrium(spec, dist)
    out = oracle_outcome_distribution(strat, spec, dist)
    assert out.expected_probs.shape == (2,)
    assert out.expected_probs.sum() == pytest.approx(1.0, abs=1e-12)
    # the instance is symmetric, so both alternatives are equally likely
    assert out.expected_probs[0] == pytest.approx(0.5, abs=1e-10)
    # profiles are enumerated as type-count vectors: C(n + s - 1, s - 1)
    assert out.profile_count == math.comb(3 + 1, 1)
    assert 0.0 <= out.modal_efficiency_mass <= 1.0
    assert 0.0 <= out.expected_q_at_util_argmax <= 1.0


def test_oracle_rejects_oversized_instances():
    dist = two_type_dist()
    with pytest.raises(ValueError):
        oracle_equilibrium(ProblemSpec(m=2, n=40, c=1.0), dist)
    big = Discrete(probs=np.full(4, 0.25),
                   atoms=np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.2], [0.2, 0.5]]))
    with pytest.raises(ValueError):
        oracle_equilibrium(ProblemSpec(m=2, n=3, c=1.0), big)
