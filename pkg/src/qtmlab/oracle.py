"""Brute-force reference answers for small instances.

Everything here works by enumeration and grid search rather than
first-order conditions, so it cross-checks the main solver with entirely
different numerics. Kept deliberately simple; only small m, n and support
sizes are in range.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .mechanism import ProblemSpec, vote_box_bound
from .preferences import Discrete
from .solver import TabularStrategy
from .util import compositions, multinomial_weights

ORACLE_MAX_M = 3
ORACLE_MAX_N = 12
ORACLE_MAX_SUPPORT = 3


@dataclass(frozen=True)
class OracleConfig:
    grid_points_per_axis: int = 401
    refinement_rounds: int = 3
    enumeration_cap: int = 10**7

    def __post_init__(self):
        if self.grid_points_per_axis < 3 or self.grid_points_per_axis % 2 == 0:
            raise ConfigError("oracle.grid_points_per_axis: must be an odd integer >= 3")
        if self.refinement_rounds < 0:
            raise ConfigError("oracle.refinement_rounds: must be >= 0")
        if self.enumeration_cap < 1:
            raise ConfigError("oracle.enumeration_cap: must be positive")


@dataclass(frozen=True)
class OracleReport:
    converged: bool
    cycling: bool
    iterations: int
    resolution: float


@dataclass(frozen=True, eq=False)
class OracleOutcome:
    expected_probs: np.ndarray
    modal_efficiency_mass: float
    expected_q_at_util_argmax: float
    profile_count: int


def _require_discrete(dist) -> Discrete:
    if not isinstance(dist, Discrete):
        raise ValueError("the oracle only handles finite-support distributions")
    return dist


def _enumerate_profiles(agents: int, dist: Discrete, cap: int):
    """All type-count vectors over `agents` draws, with multinomial weights."""
    s = dist.support_size
    size = math.comb(agents + s - 1, s - 1)
    if size > cap:
        raise ValueError(f"enumeration needs {size} profiles, above the cap {cap}")
    counts = compositions(agents, s)
    weights = multinomial_weights(counts, dist.probs)
    weights = weights / weights.sum()
    return counts, weights


def _opponent_field(strategy: TabularStrategy, spec: ProblemSpec, dist: Discrete, cap: int):
    if spec.n == 1:
        return np.zeros((1, spec.m)), np.ones(1), 0.0
    counts, weights = _enumerate_profiles(spec.n - 1, dist, cap)
    totals = counts @ strategy.votes
    costs = (strategy.votes * strategy.votes).sum(axis=1)
    # every opponent rebates c * ||a||^2 / (n-1); in expectation that sums to
    # c * E||a||^2 regardless of n
    rebate = spec.c * float(dist.probs @ costs)
    return totals, weights, rebate


def oracle_expected_utility(u: np.ndarray, a: np.ndarray, strategy: TabularStrategy,
                            spec: ProblemSpec, dist, config: OracleConfig | None = None) -> float:
    """Exact expected utility of vote a for a type-u agent, by enumeration."""
    cfg = config or OracleConfig()
    dist = _require_discrete(dist)
    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    totals, weights, rebate = _opponent_field(strategy, spec, dist, cfg.enumeration_cap)
    value = float(kernels.choice_values(a[None, :], totals, weights, u)[0])
    return value - spec.c * float(a @ a) + rebate


def _grid_search(u, totals, weights, spec: ProblemSpec, cfg: OracleConfig):
    bound = vote_box_bound(spec)
    m = spec.m
    center = np.zeros(m)
    width = bound
    points = cfg.grid_points_per_axis
    best = center
    for _ in range(cfg.refinement_rounds + 1):
        axes = []
        for j in range(m):
            lo = max(-bound, center[j] - width)
            hi = min(bound, center[j] + width)
            axes.append(np.linspace(lo, hi, points))
        if m == 2:
            cand = np.stack(np.meshgrid(axes[0], axes[1], indexing="ij"), axis=-1).reshape(-1, m)
            values = kernels.choice_values(cand, totals, weights, u)
            values -= spec.c * (cand * cand).sum(axis=1)
            best = cand[int(np.argmax(values))]
        else:
            # chunk by the first axis so the candidate block stays small
            best_val = -np.inf
            grid_yz = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, m - 1)
            for x in axes[0]:
                cand = np.concatenate([np.full((grid_yz.shape[0], 1), x), grid_yz], axis=1)
                values = kernels.choice_values(cand, totals, weights, u)
                values -= spec.c * (cand * cand).sum(axis=1)
                i = int(np.argmax(values))
                if values[i] > best_val:
                    best_val = values[i]
                    best = cand[i]
        center = best
        width = width / 10.0
    spacing = 2.0 * bound / (points - 1) / 10.0 ** cfg.refinement_rounds
    return best, spacing


def oracle_best_response(u: np.ndarray, strategy: TabularStrategy, spec: ProblemSpec,
                         dist, config: OracleConfig | None = None) -> np.ndarray:
    """Grid-search maximizer of the exact expected utility over the vote box.

    Progressively refines around the incumbent; final spacing is the base
    grid step shrunk tenfold per refinement round.
    """
    cfg = config or OracleConfig()
    if spec.m > ORACLE_MAX_M:
        raise ValueError(f"oracle best response supports m <= {ORACLE_MAX_M}")
    dist = _require_discrete(dist)
    u = np.asarray(u, dtype=np.float64)
    diffs = np.abs(u[:, None] - u[None, :])
    if diffs.max() == 0.0:
        return np.zeros(spec.m)
    totals, weights, _ = _opponent_field(strategy, spec, dist, cfg.enumeration_cap)
    best, _ = _grid_search(u, totals, weights, spec, cfg)
    return best


def oracle_equilibrium(spec: ProblemSpec, dist, config: OracleConfig | None = None,
                       max_rounds: int = 200):
    """Best-response iteration with the grid oracle at every support point.

    Returns (strategy, report). Cycling between grid points is detected by
    revisiting a previously seen strategy and is reported rather than raised.
    """
    cfg = config or OracleConfig()
    dist = _require_discrete(dist)
    if spec.m > ORACLE_MAX_M or spec.n > ORACLE_MAX_N or dist.support_size > ORACLE_MAX_SUPPORT:
        raise ValueError(
            f"oracle equilibrium supports m <= {ORACLE_MAX_M}, n <= {ORACLE_MAX_N}, "
            f"support <= {ORACLE_MAX_SUPPORT}")
    bound = vote_box_bound(spec)
    points = cfg.grid_points_per_axis
    resolution = 2.0 * bound / (points - 1) / 10.0 ** cfg.refinement_rounds
    votes = np.zeros((dist.support_size, spec.m))
    seen = set()
    cycling = False
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        strategy = TabularStrategy(dist.atoms.copy(), votes)
        new_votes = np.stack([
            oracle_best_response(dist.atoms[t], strategy, spec, dist, cfg)
            for t in range(dist.support_size)
        ])
        change = float(np.abs(new_votes - votes).max())
        votes = new_votes
        if change < resolution:
            converged = True
            break
        key = tuple(np.round(votes / resolution).astype(np.int64).ravel().tolist())
        if key in seen:
            cycling = True
            break
        seen.add(key)
    strategy = TabularStrategy(dist.atoms.copy(), votes)
    return strategy, OracleReport(converged=converged, cycling=cycling,
                                  iterations=rounds, resolution=resolution)


def oracle_outcome_distribution(strategy: TabularStrategy, spec: ProblemSpec, dist,
                                config: OracleConfig | None = None) -> OracleOutcome:
    """Exact outcome distribution by enumerating all n-agent type profiles.

    Reports expected selection probabilities, the probability mass on
    profiles whose modal alternative is the utilitarian argmax, and the
    expected selection probability assigned to that argmax.
    """
    cfg = config or OracleConfig()
    dist = _require_discrete(dist)
    counts, weights = _enumerate_profiles(spec.n, dist, cfg.enumeration_cap)
    totals = counts @ strategy.votes
    probs = kernels.softmax_rows(totals)
    type_totals = counts @ dist.atoms
    util_arg = np.argmax(type_totals, axis=1)
    modal = np.argmax(probs, axis=1)
    expected_probs = weights @ probs
    modal_mass = float(weights @ (modal == util_arg))
    q_at_arg = float(weights @ probs[np.arange(probs.shape[0]), util_arg])
    return OracleOutcome(expected_probs=expected_probs, modal_efficiency_mass=modal_mass,
                         expected_q_at_util_argmax=q_at_arg, profile_count=counts.shape[0])
