"""Symmetric equilibrium computation from the first-order conditions.

A strategy maps a type vector u to a vote vector a. At an equilibrium every
vote solves 2c a_j = sum_{k != j} (u_j - u_k) r_jk(a), where r_jk is the
expected product of selection probabilities over the field of opponent vote
totals. The solver alternates building that field from the current strategy
with damped best responses until the strategy stops moving and the residual
of the first-order conditions is small.
"""

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError, ConvergenceError, VoteBoxError
from .mechanism import ProblemSpec, vote_box_bound
from .preferences import Discrete, DistributionSummary, summarize
from .util import compositions, multinomial_weights, rng_from, stable_seed

EXACT_RESID_TARGET = 1e-7     # drive the residual well under the 1e-6 reporting threshold
EXACT_RESID_THRESHOLD = 1e-6
MC_SE_FACTOR = 8.0            # sampled fields: residual threshold in units of its standard error
SUM_CHUNK_ROWS = 4096
SIM_CHUNK_ROWS = 1024


@dataclass
class SolverConfig:
    damping: float = 0.5
    inner_tol: float = 1e-10
    outer_tol: float = 1e-6
    max_inner: int = 200
    max_outer: int = 500
    n_mc: int = 100_000
    seed: int = 0
    field_refresh: bool = True
    exact_field_cap: int = 10**6
    residual_target: float | None = None
    refit_probes: int = 128
    residual_probes: int = 32
    warm_start: object = None

    def __post_init__(self):
        if not (0 < self.damping <= 1):
            raise ConfigError("solver.damping: must lie in (0, 1]")
        for name in ("inner_tol", "outer_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name}: must be positive")
        for name in ("max_inner", "max_outer", "n_mc", "refit_probes", "residual_probes"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"solver.{name}: must be a positive integer")


@dataclass(eq=False)
class TabularStrategy:
    """One vote vector per support type."""

    types: np.ndarray   # (s, m)
    votes: np.ndarray   # (s, m)

    def __post_init__(self):
        self.types = np.asarray(self.types, dtype=np.float64)
        self.votes = np.asarray(self.votes, dtype=np.float64)
        if self.types.shape != self.votes.shape or self.types.ndim != 2:
            raise ValueError("types and votes must be matching (s, m) arrays")

    def type_index(self, u: np.ndarray) -> int:
        match = np.flatnonzero(np.all(np.isclose(self.types, np.asarray(u)[None, :], atol=1e-12), axis=1))
        if match.size == 0:
            raise KeyError(f"type {u!r} is not in the strategy support")
        return int(match[0])

    def votes_for(self, u: np.ndarray) -> np.ndarray:
        return self.votes[self.type_index(u)]

    def max_abs_vote(self) -> float:
        return float(np.abs(self.votes).max()) if self.votes.size else 0.0


@dataclass(eq=False)
class LinearStrategy:
    """Votes linear in pairwise value differences through a pivotality matrix.

    a_j(u) = (1 / 2c) sum_{k != j} (u_j - u_k) pi_jk with pi symmetric and
    zero on the diagonal. This is the natural parametric family for
    continuous type distributions.
    """

    pi: np.ndarray
    c: float

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        m = self.pi.shape[0]
        if self.pi.shape != (m, m):
            raise ValueError("pi must be square")
        if not np.allclose(self.pi, self.pi.T, atol=1e-10):
            raise ValueError("pi must be symmetric")
        if np.abs(np.diag(self.pi)).max(initial=0.0) > 1e-12:
            raise ValueError("pi must have a zero diagonal")

    def votes_for(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        squeeze = u.ndim == 1
        rows = np.atleast_2d(u)
        row_sums = self.pi.sum(axis=1)
        a = (rows * row_sums[None, :] - rows @ self.pi) / (2.0 * self.c)
        return a[0] if squeeze else a

    def max_abs_vote(self, u_max: float) -> float:
        worst = (u_max / (2.0 * self.c)) * self.pi.sum(axis=1)
        return float(worst.max(initial=0.0))


@dataclass(eq=False)
class OpponentField:
    """Realized distribution of opponent vote totals: atoms plus weights."""

    kind: str                    # "exact" or "mc"
    totals: np.ndarray           # (N, m)
    weights: np.ndarray          # (N,)
    n_opponents: int
    vote_bound: float
    counts: np.ndarray | None = None   # (N, s) opponent type counts, tabular fields
    sums: np.ndarray | None = None     # (N, m) opponent type sums, linear fields

    @property
    def atom_count(self) -> int:
        return self.totals.shape[0]


@dataclass(eq=False)
class EquilibriumResult:
    spec: ProblemSpec
    strategy: object
    converged: bool
    foc_residual: float
    residual_threshold: float
    outer_iterations: int
    pivotality: np.ndarray
    pivotality_se: np.ndarray
    type_pivotality: np.ndarray       # per support type (tabular) or per probe type (linear)
    delta_hat: float
    contraction_sum: float
    contraction_margin: float
    field_kind: str
    field_atoms: int
    damping_final: float
    summary: DistributionSummary


def _check_values(u: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.m,):
        raise ValueError(f"type vector must have shape ({spec.m},), got {u.shape}")
    if np.any(u < -1e-12) or np.any(u > spec.u_max + 1e-9):
        raise ValueError("type values must lie in [0, u_max]")
    return u


def _zero_field(spec: ProblemSpec) -> OpponentField:
    return OpponentField("exact", np.zeros((1, spec.m)), np.ones(1), 0, vote_box_bound(spec))


def _sample_sums(dist, n_op: int, n_mc: int, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((n_mc, dist.m))
    for lo in range(0, n_mc, SUM_CHUNK_ROWS):
        rows = min(SUM_CHUNK_ROWS, n_mc - lo)
        draws = dist.sample(rng, rows * n_op)
        out[lo:lo + rows] = draws.reshape(rows, n_op, dist.m).sum(axis=1)
    return out


def build_field(strategy, spec: ProblemSpec, dist, config: SolverConfig | None = None,
                iteration: int = 0) -> OpponentField:
    """Distribution of the n - 1 opponents' vote totals under a strategy.

    Finite-support distributions get the exact multinomial field when the
    number of opponent count vectors fits under the cap, otherwise a
    Monte Carlo field whose draws are a deterministic function of
    (seed, iteration).
    """
    cfg = config or SolverConfig()
    n_op = spec.n - 1
    bound = vote_box_bound(spec)
    if n_op == 0:
        return _zero_field(spec)
    if isinstance(strategy, TabularStrategy):
        if not isinstance(dist, Discrete):
            raise ValueError("tabular strategies require a finite-support distribution")
        if strategy.types.shape != dist.atoms.shape or not np.allclose(strategy.types, dist.atoms, atol=1e-12):
            raise ValueError("strategy support does not match the distribution support")
        s = dist.support_size
        if math.comb(n_op + s - 1, s - 1) <= cfg.exact_field_cap:
            counts = compositions(n_op, s)
            weights = multinomial_weights(counts, dist.probs)
            total = float(weights.sum())
            if abs(total - 1.0) > 1e-10:
                raise RuntimeError(f"enumerated field weights sum to {total}, expected 1")
            weights = weights / total
            kind = "exact"
        else:
            rng = rng_from(cfg.seed, "field", iteration)
            counts = rng.multinomial(n_op, dist.probs, size=cfg.n_mc)
            weights = np.full(cfg.n_mc, 1.0 / cfg.n_mc)
            kind = "mc"
        totals = counts @ strategy.votes
        return OpponentField(kind, totals, weights, n_op, bound, counts=counts)
    if isinstance(strategy, LinearStrategy):
        rng = rng_from(cfg.seed, "field", iteration)
        sums = _sample_sums(dist, n_op, cfg.n_mc, rng)
        totals = strategy.votes_for(sums)
        weights = np.full(cfg.n_mc, 1.0 / cfg.n_mc)
        return OpponentField("mc", totals, weights, n_op, bound, sums=sums)
    raise ValueError(f"unknown strategy type: {type(strategy).__name__}")


def refresh_field(field: OpponentField, strategy) -> OpponentField:
    """Recompute totals under a new strategy, reusing the field's type draws."""
    if field.counts is not None:
        totals = field.counts @ strategy.votes
    elif field.sums is not None:
        totals = strategy.votes_for(field.sums)
    else:
        totals = field.totals
    return replace(field, totals=totals)


def estimate_rjk(a: np.ndarray, field: OpponentField) -> np.ndarray:
    """Pivotality matrix E[Q_j Q_k] at own vote a against the field."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (field.totals.shape[1],):
        raise ValueError("vote vector does not match the field dimension")
    if np.abs(a).max(initial=0.0) > field.vote_bound + 1e-9:
        raise VoteBoxError("vote outside the admissible box")
    return kernels.rjk_matrix(a, field.totals, field.weights)


def _foc_gap(u: np.ndarray, a: np.ndarray, field: OpponentField, c: float):
    """Residual vector 2c a - RHS(a) of the first-order conditions, plus r."""
    r = kernels.rjk_matrix(a, field.totals, field.weights)
    rhs = ((u[:, None] - u[None, :]) * r).sum(axis=1)
    return 2.0 * c * a - rhs, r


class _Damping:
    """Step-size controller: halve on repeated sign-alternating updates."""

    def __init__(self, lam: float, max_halvings: int, fail_on_exhaust: bool):
        self.lam = lam
        self.max_halvings = max_halvings
        self.fail_on_exhaust = fail_on_exhaust
        self.halvings = 0
        self._osc = 0
        self._prev = None

    def step(self, update: np.ndarray) -> float:
        flat = update.ravel()
        if self._prev is not None and float(self._prev @ flat) < 0.0:
            self._osc += 1
            if self._osc >= 2:
                if self.halvings >= self.max_halvings:
                    if self.fail_on_exhaust:
                        raise ConvergenceError(
                            f"oscillation persists after {self.max_halvings} damping halvings")
                else:
                    self.lam *= 0.5
                    self.halvings += 1
                self._osc = 0
        else:
            self._osc = 0
        self._prev = flat.copy()
        return self.lam


def best_response(u: np.ndarray, field: OpponentField, spec: ProblemSpec,
                  config: SolverConfig | None = None, start: np.ndarray | None = None) -> np.ndarray:
    """Solve the agent's first-order conditions against a fixed field.

    Damped fixed point a <- (1 - lam) a + lam RHS(a) / 2c starting from zero
    (or `start`). Raises ConvergenceError when the iteration budget or the
    damping budget runs out.
    """
    cfg = config or SolverConfig()
    u = _check_values(u, spec)
    bound = vote_box_bound(spec)
    a = np.zeros(spec.m) if start is None else np.clip(np.asarray(start, dtype=np.float64), -bound, bound)
    diff = u[:, None] - u[None, :]
    if np.abs(diff).max() == 0.0:
        return np.zeros(spec.m)
    damping = _Damping(cfg.damping, max_halvings=5, fail_on_exhaust=True)
    two_c = 2.0 * spec.c
    for _ in range(cfg.max_inner):
        r = kernels.rjk_matrix(a, field.totals, field.weights)
        target = (diff * r).sum(axis=1) / two_c
        update = target - a
        if float(np.abs(update).max()) <= cfg.inner_tol:
            return np.clip(target, -bound, bound)
        lam = damping.step(update)
        a = np.clip(a + lam * update, -bound, bound)
    raise ConvergenceError(f"best response did not converge in {cfg.max_inner} iterations")


class _FieldSource:
    """Per-iteration fields for the outer loop, reusing draws where possible."""

    def __init__(self, strategy_kind: str, spec: ProblemSpec, dist, cfg: SolverConfig):
        self.spec = spec
        self.dist = dist
        self.cfg = cfg
        self.frozen_at: int | None = None
        self._cache_idx: int | None = None
        self._cache: OpponentField | None = None
        n_op = spec.n - 1
        self.exact = False
        if strategy_kind == "tabular" and n_op >= 0:
            s = dist.support_size
            self.exact = n_op == 0 or math.comb(n_op + s - 1, s - 1) <= cfg.exact_field_cap
        if strategy_kind == "linear" and n_op == 0:
            self.exact = True

    def draw_index(self, iteration: int) -> int:
        if self.exact:
            return 0
        if self.frozen_at is not None:
            return min(self.frozen_at, iteration)
        return iteration if self.cfg.field_refresh else 0

    def field_for(self, strategy, iteration: int) -> OpponentField:
        idx = self.draw_index(iteration)
        if self._cache is not None and self._cache_idx == idx:
            return refresh_field(self._cache, strategy)
        field = build_field(strategy, self.spec, self.dist, self.cfg, iteration=idx)
        self._cache = field
        self._cache_idx = idx
        return field

    def frozen(self, iteration: int) -> bool:
        if self.exact or not self.cfg.field_refresh:
            return True
        return self.frozen_at is not None and iteration > self.frozen_at


def _mc_stalled(changes: deque) -> bool:
    # a sampled-field loop has hit its noise floor when the step size stops shrinking
    if len(changes) < changes.maxlen:
        return False
    recent = list(changes)
    return recent[-1] > 0.5 * max(recent[:-1])


def _type_q(a: np.ndarray, field: OpponentField) -> np.ndarray:
    return kernels.softmax_rows(field.totals + a[None, :])


def _exact_pivotality(votes_by_type, type_weights, field: OpponentField):
    """E[Q_j Q_k], standard errors, and the per-type pivotality stack."""
    m = field.totals.shape[1]
    s = len(votes_by_type)
    per_type = np.empty((s, m, m))
    n = field.atom_count
    need_se = field.kind != "exact"
    mixed = np.zeros((n, m, m)) if need_se else None
    weights = np.asarray(type_weights, dtype=np.float64)
    for t, a in enumerate(votes_by_type):
        q = _type_q(np.asarray(a), field)
        prod = q[:, :, None] * q[:, None, :]
        per_type[t] = np.einsum("n,njk->jk", field.weights, prod)
        if need_se:
            mixed += weights[t] * prod
    overall = np.einsum("t,tjk->jk", weights, per_type)
    if need_se:
        second = np.einsum("n,njk->jk", field.weights, mixed * mixed)
        var = np.maximum(second - overall * overall, 0.0)
        se = np.sqrt(var / n)
    else:
        se = np.zeros((m, m))
    return overall, se, per_type


def _rhs_se(u: np.ndarray, a: np.ndarray, field: OpponentField) -> float:
    """Largest standard error of the sampled first-order-condition right side."""
    if field.kind == "exact":
        return 0.0
    q = _type_q(a, field)
    diff = u[:, None] - u[None, :]
    y = q * (q @ diff.T)
    mean = field.weights @ y
    second = field.weights @ (y * y)
    var = np.maximum(second - mean * mean, 0.0)
    return float(np.sqrt(var.max() / field.atom_count))


def _contraction_stats(votes_by_type, field: OpponentField, c: float, m: int):
    """Max over types and rows of sum_k ||grad r_jk||, and the margin to 2c/m."""
    worst = 0.0
    for a in votes_by_type:
        _, grad = kernels.rjk_grad(np.asarray(a), field.totals, field.weights)
        norms = np.sqrt((grad * grad).sum(axis=2))
        row_sums = norms.sum(axis=1) - np.diag(norms)
        worst = max(worst, float(row_sums.max()))
    return worst, 2.0 * c / m - worst


def _delta_hat(per_type: np.ndarray, overall: np.ndarray, m: int) -> float:
    off = ~np.eye(m, dtype=bool)
    ratios = per_type[:, off] / np.maximum(overall[off][None, :], 1e-300)
    return float(np.abs(ratios - 1.0).max()) if ratios.size else 0.0


def _solve_tabular(spec: ProblemSpec, dist: Discrete, cfg: SolverConfig,
                   summary: DistributionSummary) -> EquilibriumResult:
    s, m, c = dist.support_size, spec.m, spec.c
    bound = vote_box_bound(spec)
    if cfg.warm_start is not None:
        if not isinstance(cfg.warm_start, TabularStrategy) or cfg.warm_start.votes.shape != (s, m):
            raise ConfigError("solver.warm_start_path: warm start does not match the instance")
        votes = np.clip(cfg.warm_start.votes.copy(), -bound, bound)
    else:
        votes = np.zeros((s, m))
    source = _FieldSource("tabular", spec, dist, cfg)
    resid_target = cfg.residual_target
    if resid_target is None and source.exact:
        resid_target = EXACT_RESID_TARGET
    damping = _Damping(cfg.damping, max_halvings=12, fail_on_exhaust=False)
    changes: deque = deque(maxlen=6)
    converged = False
    iterations = 0
    strategy = TabularStrategy(dist.atoms.copy(), votes)
    for outer in range(cfg.max_outer):
        iterations = outer + 1
        strategy.votes = votes
        field = source.field_for(strategy, outer)
        resid = 0.0
        br = np.empty_like(votes)
        for t in range(s):
            gap, _ = _foc_gap(dist.atoms[t], votes[t], field, c)
            resid = max(resid, float(np.abs(gap).max()))
            br[t] = best_response(dist.atoms[t], field, spec, cfg, start=votes[t])
        update = br - votes
        change = float(np.abs(update).max())
        changes.append(change)
        if source.exact:
            if change <= cfg.outer_tol and (resid_target is None or resid <= resid_target):
                converged = True
                break
        else:
            if source.frozen(outer) and change <= cfg.outer_tol:
                converged = True
                break
            if source.frozen_at is None and cfg.field_refresh and _mc_stalled(changes):
                source.frozen_at = outer
        lam = damping.step(update)
        votes = np.clip(votes + lam * update, -bound, bound)
    strategy = TabularStrategy(dist.atoms.copy(), votes)
    if source.exact:
        report_field = source.field_for(strategy, 0)
    else:
        # honest residual: fresh draws, not the frozen set the loop converged on
        report_field = build_field(strategy, spec, dist, cfg, iteration=iterations)
    resid = 0.0
    se_rhs = 0.0
    for t in range(s):
        gap, _ = _foc_gap(dist.atoms[t], votes[t], report_field, c)
        resid = max(resid, float(np.abs(gap).max()))
        se_rhs = max(se_rhs, _rhs_se(dist.atoms[t], votes[t], report_field))
    threshold = EXACT_RESID_THRESHOLD if report_field.kind == "exact" \
        else max(EXACT_RESID_THRESHOLD, MC_SE_FACTOR * se_rhs)
    converged = converged and resid <= threshold
    overall, se, per_type = _exact_pivotality(list(votes), dist.probs, report_field)
    contraction_sum, margin = _contraction_stats(list(votes), report_field, c, m)
    return EquilibriumResult(
        spec=spec, strategy=strategy, converged=converged, foc_residual=resid,
        residual_threshold=threshold, outer_iterations=iterations,
        pivotality=overall, pivotality_se=se, type_pivotality=per_type,
        delta_hat=_delta_hat(per_type, overall, m),
        contraction_sum=contraction_sum, contraction_margin=margin,
        field_kind=report_field.kind, field_atoms=report_field.atom_count,
        damping_final=damping.lam, summary=summary)


def _solve_linear(spec: ProblemSpec, dist, cfg: SolverConfig,
                  summary: DistributionSummary) -> EquilibriumResult:
    m, c = spec.m, spec.c
    bound = vote_box_bound(spec)
    if cfg.warm_start is not None:
        if not isinstance(cfg.warm_start, LinearStrategy) or cfg.warm_start.pi.shape != (m, m):
            raise ConfigError("solver.warm_start_path: warm start does not match the instance")
        pi = cfg.warm_start.pi.copy()
    else:
        pi = np.zeros((m, m))
    fit_u = dist.sample(rng_from(cfg.seed, "linear_fit"), cfg.refit_probes)
    res_u = dist.sample(rng_from(cfg.seed, "linear_residual"), cfg.residual_probes)
    source = _FieldSource("linear", spec, dist, cfg)
    damping = _Damping(cfg.damping, max_halvings=12, fail_on_exhaust=False)
    changes: deque = deque(maxlen=6)
    converged = False
    iterations = 0
    off_diag = ~np.eye(m, dtype=bool)
    for outer in range(cfg.max_outer):
        iterations = outer + 1
        strategy = LinearStrategy(pi, c)
        field = source.field_for(strategy, outer)
        a_fit = np.clip(strategy.votes_for(fit_u), -bound, bound)
        pi_new = np.zeros((m, m))
        for p in range(a_fit.shape[0]):
            pi_new += kernels.rjk_matrix(a_fit[p], field.totals, field.weights)
        pi_new /= a_fit.shape[0]
        pi_new[~off_diag] = 0.0
        pi_new = 0.5 * (pi_new + pi_new.T)
        update = pi_new - pi
        change = float(np.abs(update).max())
        changes.append(change)
        if source.frozen(outer) and change <= cfg.outer_tol:
            converged = True
            break
        if source.frozen_at is None and cfg.field_refresh and not source.exact and _mc_stalled(changes):
            source.frozen_at = outer
        lam = damping.step(update)
        pi = pi + lam * update
    strategy = LinearStrategy(pi, c)
    report_field = build_field(strategy, spec, dist, cfg, iteration=iterations)
    a_res = np.clip(strategy.votes_for(res_u), -bound, bound)
    resid = 0.0
    se_rhs = 0.0
    for p in range(a_res.shape[0]):
        gap, _ = _foc_gap(res_u[p], a_res[p], report_field, c)
        resid = max(resid, float(np.abs(gap).max()))
        se_rhs = max(se_rhs, _rhs_se(res_u[p], a_res[p], report_field))
    threshold = EXACT_RESID_THRESHOLD if report_field.kind == "exact" \
        else max(EXACT_RESID_THRESHOLD, MC_SE_FACTOR * se_rhs)
    in_box = strategy.max_abs_vote(spec.u_max) <= bound + 1e-9
    # the linear form is exact only asymptotically; its model error is reported
    # through foc_residual rather than folded into the convergence flag
    converged = converged and in_box
    a_fit = np.clip(strategy.votes_for(fit_u), -bound, bound)
    overall, se, per_probe = _exact_pivotality(list(a_fit), np.full(a_fit.shape[0], 1.0 / a_fit.shape[0]),
                                               report_field)
    contraction_sum, margin = _contraction_stats(list(a_res), report_field, c, m)
    return EquilibriumResult(
        spec=spec, strategy=strategy, converged=converged, foc_residual=resid,
        residual_threshold=threshold, outer_iterations=iterations,
        pivotality=overall, pivotality_se=se, type_pivotality=per_probe,
        delta_hat=_delta_hat(per_probe, overall, m),
        contraction_sum=contraction_sum, contraction_margin=margin,
        field_kind=report_field.kind, field_atoms=report_field.atom_count,
        damping_final=damping.lam, summary=summary)


def solve_equilibrium(spec: ProblemSpec, dist, config: SolverConfig | None = None) -> EquilibriumResult:
    """Compute the symmetric equilibrium strategy for a distribution of types.

    Finite-support distributions get a tabular strategy; continuous ones get
    the linear-pivotality representation. The result reports the residual of
    the first-order conditions measured against a freshly built field, so a
    `converged` flag always comes with an honest error estimate.
    """
    cfg = config or SolverConfig()
    summary = summarize(dist, u_max=spec.u_max)
    if dist.m != spec.m:
        raise ConfigError("distribution: dimension does not match problem.m")
    if isinstance(dist, Discrete):
        return _solve_tabular(spec, dist, cfg, summary)
    return _solve_linear(spec, dist, cfg, summary)


@dataclass(eq=False)
class TrueWorldStats:
    mean_probs: np.ndarray
    win_freq: np.ndarray
    efficiency_prob: float
    util_argmax_freq: np.ndarray
    welfare_qtm: float
    welfare_opt: float
    trials: int


@dataclass(eq=False)
class BeliefSolveResult:
    group_results: list
    fractions: np.ndarray
    true_world: TrueWorldStats


def _group_vote_tables(groups, true_dist):
    """Per-group vote rows aligned to the true support (tabular strategies)."""
    tables = []
    for res in groups:
        strat = res.strategy
        table = np.empty((true_dist.support_size, true_dist.atoms.shape[1]))
        for i in range(true_dist.support_size):
            try:
                table[i] = strat.votes[strat.type_index(true_dist.atoms[i])]
            except KeyError:
                raise ConfigError(
                    "beliefs.groups: believed support must contain every true support point") from None
        tables.append(table)
    return np.stack(tables)


def solve_with_beliefs(spec: ProblemSpec, true_dist, beliefs, config: SolverConfig | None = None,
                       trials: int = 100_000) -> BeliefSolveResult:
    """Equilibrium under heterogeneous beliefs, evaluated against the truth.

    Each group solves the game as if its own belief were common knowledge;
    the groups' strategies are then simulated on type profiles drawn from
    the true distribution.
    """
    cfg = config or SolverConfig()
    if true_dist.m != spec.m:
        raise ConfigError("distribution: dimension does not match problem.m")
    group_results = []
    for g, bdist in enumerate(beliefs.distributions):
        if bdist.m != spec.m:
            raise ConfigError(f"beliefs.groups[{g}]: dimension does not match problem.m")
        sub = replace(cfg, seed=stable_seed(cfg.seed, "belief_group", g), warm_start=None)
        group_results.append(solve_equilibrium(spec, bdist, sub))
    fractions = np.array(beliefs.fractions)
    rng = rng_from(cfg.seed, "belief_trueworld")
    m, n = spec.m, spec.n
    discrete = isinstance(true_dist, Discrete)
    if discrete:
        tables = _group_vote_tables(group_results, true_dist)
    cum_frac = np.cumsum(fractions)
    mean_probs = np.zeros(m)
    win_counts = np.zeros(m)
    util_counts = np.zeros(m)
    eff_acc = 0.0
    welfare_qtm = 0.0
    welfare_opt = 0.0
    done = 0
    while done < trials:
        rows = min(SIM_CHUNK_ROWS, trials - done)
        if discrete:
            idx = true_dist.sample_indices(rng, rows * n).reshape(rows, n)
            types_tot = true_dist.atoms[idx].sum(axis=1)
            labels = (rng.random((rows, n))[:, :, None] > cum_frac[None, None, :-1]).sum(axis=2)
            votes = tables[labels, idx]
        else:
            types = true_dist.sample(rng, rows * n).reshape(rows, n, m)
            types_tot = types.sum(axis=1)
            labels = (rng.random((rows, n))[:, :, None] > cum_frac[None, None, :-1]).sum(axis=2)
            votes = np.zeros((rows, n, m))
            for g, res in enumerate(group_results):
                mask = labels == g
                if mask.any():
                    votes[mask] = res.strategy.votes_for(types[mask])
        totals = votes.sum(axis=1)
        q = kernels.softmax_rows(totals)
        cum = np.cumsum(q, axis=1)
        draws = np.minimum((rng.random(rows)[:, None] > cum).sum(axis=1), m - 1)
        util_arg = np.argmax(types_tot, axis=1)
        mean_probs += q.sum(axis=0)
        win_counts += np.bincount(draws, minlength=m)
        util_counts += np.bincount(util_arg, minlength=m)
        eff_acc += float(q[np.arange(rows), util_arg].sum())
        welfare_qtm += float((q * types_tot).sum())
        welfare_opt += float(types_tot.max(axis=1).sum())
        done += rows
    return BeliefSolveResult(
        group_results=group_results,
        fractions=fractions,
        true_world=TrueWorldStats(
            mean_probs=mean_probs / trials,
            win_freq=win_counts / trials,
            efficiency_prob=eff_acc / trials,
            util_argmax_freq=util_counts / trials,
            welfare_qtm=welfare_qtm / trials,
            welfare_opt=welfare_opt / trials,
            trials=trials,
        ),
    )


def strategy_to_dict(strategy) -> dict:
    if isinstance(strategy, TabularStrategy):
        return {"kind": "tabular", "types": strategy.types.tolist(), "votes": strategy.votes.tolist()}
    if isinstance(strategy, LinearStrategy):
        return {"kind": "linear", "pi": strategy.pi.tolist(), "c": strategy.c}
    raise ValueError(f"unknown strategy type: {type(strategy).__name__}")


def strategy_from_dict(d: dict):
    if d["kind"] == "tabular":
        return TabularStrategy(np.array(d["types"]), np.array(d["votes"]))
    if d["kind"] == "linear":
        return LinearStrategy(np.array(d["pi"]), float(d["c"]))
    raise ValueError(f"unknown strategy kind: {d['kind']}")


def result_to_dict(res: EquilibriumResult) -> dict:
    return {
        "strategy": strategy_to_dict(res.strategy),
        "converged": bool(res.converged),
        "foc_residual": float(res.foc_residual),
        "residual_threshold": float(res.residual_threshold),
        "outer_iterations": int(res.outer_iterations),
        "pivotality": res.pivotality.tolist(),
        "pivotality_se": res.pivotality_se.tolist(),
        "type_pivotality": res.type_pivotality.tolist(),
        "delta_hat": float(res.delta_hat),
        "contraction_sum": float(res.contraction_sum),
        "contraction_margin": float(res.contraction_margin),
        "field_kind": res.field_kind,
        "field_atoms": int(res.field_atoms),
        "damping_final": float(res.damping_final),
        "summary": {
            "means": res.summary.means.tolist(),
            "delta": float(res.summary.delta),
            "sort_permutation": [int(i) for i in res.summary.sort_permutation],
            "assumption1_ok": bool(res.summary.assumption1_ok),
            "assumption2": [
                {"alternative": v.alternative, "passed": v.passed, "note": v.note}
                for v in res.summary.assumption2_report
            ],
        },
    }


def result_from_dict(d: dict, spec: ProblemSpec, summary: DistributionSummary) -> EquilibriumResult:
    return EquilibriumResult(
        spec=spec,
        strategy=strategy_from_dict(d["strategy"]),
        converged=bool(d["converged"]),
        foc_residual=float(d["foc_residual"]),
        residual_threshold=float(d["residual_threshold"]),
        outer_iterations=int(d["outer_iterations"]),
        pivotality=np.array(d["pivotality"]),
        pivotality_se=np.array(d["pivotality_se"]),
        type_pivotality=np.array(d["type_pivotality"]),
        delta_hat=float(d["delta_hat"]),
        contraction_sum=float(d["contraction_sum"]),
        contraction_margin=float(d["contraction_margin"]),
        field_kind=d["field_kind"],
        field_atoms=int(d["field_atoms"]),
        damping_final=float(d["damping_final"]),
        summary=summary,
    )
