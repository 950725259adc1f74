"""Empirical checks of the mechanism's equilibrium behavior.

Everything simulates full n-agent type profiles under a converged strategy
and measures outcome concentration, efficiency, welfare and the
concentration bounds the theory predicts. All randomness is seeded, so any
report is bit-reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .mechanism import ProblemSpec, vote_box_bound
from .preferences import Discrete, summarize
from .solver import (EquilibriumResult, LinearStrategy, SolverConfig, TabularStrategy,
                     build_field)
from .util import multinomial_rows, rng_from, stable_seed

BETA_GRID = np.linspace(0.0, 1.0, 1001)
SIM_CHUNK = 2048


@dataclass
class DiagnosticsConfig:
    trials: int = 100_000
    probe_count: int = 64
    epsilon: float | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ConfigError("diagnostics.trials: must be a positive integer")
        if int(self.probe_count) < 1:
            raise ConfigError("diagnostics.probe_count: must be a positive integer")
        if self.epsilon is not None and self.epsilon < 0:
            raise ConfigError("diagnostics.epsilon: must be >= 0")


@dataclass(eq=False)
class SimData:
    totals: np.ndarray       # (T, m) vote totals
    probs: np.ndarray        # (T, m) selection probabilities
    type_totals: np.ndarray  # (T, m) summed values per alternative
    util_argmax: np.ndarray  # (T,)
    draws: np.ndarray        # (T,) realized winners
    counts: np.ndarray | None  # (T, s) profile type counts when finite support


def _require_match(eq: EquilibriumResult, dist):
    if isinstance(eq.strategy, TabularStrategy):
        if not isinstance(dist, Discrete):
            raise ValueError("tabular equilibrium paired with a non-finite distribution")
        if eq.strategy.types.shape != dist.atoms.shape or \
                not np.allclose(eq.strategy.types, dist.atoms, atol=1e-12):
            raise ValueError("equilibrium support does not match the distribution")


def simulate(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int, seed: int) -> SimData:
    """Simulate `trials` full profiles under the equilibrium strategy."""
    _require_match(eq, dist)
    rng = rng_from(seed, "profiles")
    m = spec.m
    if isinstance(eq.strategy, TabularStrategy):
        counts = rng.multinomial(spec.n, dist.probs, size=trials)
        totals = counts @ eq.strategy.votes
        type_totals = counts @ dist.atoms
    else:
        counts = None
        type_totals = np.empty((trials, m))
        done = 0
        while done < trials:
            rows = min(SIM_CHUNK, trials - done)
            draws = dist.sample(rng, rows * spec.n)
            type_totals[done:done + rows] = draws.reshape(rows, spec.n, m).sum(axis=1)
            done += rows
        # votes are linear in the type, so profile totals only need the type sums
        totals = eq.strategy.votes_for(type_totals)
    probs = kernels.softmax_rows(totals)
    cum = np.cumsum(probs, axis=1)
    winners = np.minimum((rng.random(trials)[:, None] > cum).sum(axis=1), m - 1)
    util_argmax = np.argmax(type_totals, axis=1)
    return SimData(totals=totals, probs=probs, type_totals=type_totals,
                   util_argmax=util_argmax, draws=winners, counts=counts)


def simulate_profiles(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int, seed: int = 0):
    """Per-trial stream of (type counts or type sums, totals, probabilities, utilitarian argmax)."""
    data = simulate(eq, spec, dist, trials, seed)
    for i in range(trials):
        profile = data.counts[i] if data.counts is not None else data.type_totals[i]
        yield profile, data.totals[i], data.probs[i], int(data.util_argmax[i])


@dataclass(frozen=True)
class Theorem1Block:
    beta_estimate: float
    beta_se: float
    warned: bool


@dataclass(frozen=True, eq=False)
class ConcentrationBlock:
    grid: np.ndarray
    winner_cdf: np.ndarray


def theorem1_check(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int = 100_000,
                   seed: int = 0, sim: SimData | None = None) -> Theorem1Block:
    """Smallest beta on a 1e-3 grid with empirical P(Q_best <= 1 - beta) <= beta."""
    summary = eq.summary
    data = sim if sim is not None else simulate(eq, spec, dist, trials, seed)
    best = int(summary.sort_permutation[0])
    q1 = np.sort(data.probs[:, best])
    t = q1.shape[0]
    cdf = np.searchsorted(q1, 1.0 - BETA_GRID, side="right") / t
    ok = np.flatnonzero(cdf <= BETA_GRID)
    beta = float(BETA_GRID[ok[0]])
    se = math.sqrt(max(beta * (1.0 - beta), 1.0 / t) / t) + 0.0005
    return Theorem1Block(beta_estimate=beta, beta_se=se, warned=not summary.assumption1_ok)


def winner_concentration(sim: SimData) -> ConcentrationBlock:
    """Empirical CDF of the winner's selection probability max_j Q_j."""
    top = np.sort(sim.probs.max(axis=1))
    cdf = np.searchsorted(top, BETA_GRID, side="right") / top.shape[0]
    return ConcentrationBlock(grid=BETA_GRID.copy(), winner_cdf=cdf)


@dataclass(frozen=True)
class ExtremesBlock:
    frequency: float
    bound: float


def extremes_check(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int = 100_000,
                   seed: int = 0, sim: SimData | None = None) -> ExtremesBlock:
    """Empirical P(V_worst < 0 < V_best) against 1 - 2m exp(-delta^2 n / 32)."""
    summary = eq.summary
    data = sim if sim is not None else simulate(eq, spec, dist, trials, seed)
    best = int(summary.sort_permutation[0])
    worst = int(summary.sort_permutation[-1])
    freq = float(np.mean((data.totals[:, worst] < 0.0) & (data.totals[:, best] > 0.0)))
    bound = 1.0 - 2.0 * spec.m * math.exp(-summary.delta ** 2 * spec.n / 32.0)
    return ExtremesBlock(frequency=freq, bound=bound)


@dataclass(frozen=True)
class Lemma1Block:
    ratio_min: float
    ratio_max: float
    band_low: float
    band_high: float
    probes: int


def lemma1_check(eq: EquilibriumResult, spec: ProblemSpec, dist, probe_count: int = 64,
                 seed: int = 0) -> Lemma1Block:
    """Range of r_jk(a) / E[Q_j Q_k] over random vote-box probes vs exp(+-16/sqrt(c))."""
    rng = rng_from(seed, "lemma1")
    bound = vote_box_bound(spec)
    field = build_field(eq.strategy, spec, dist, SolverConfig(seed=seed), iteration=0)
    off = ~np.eye(spec.m, dtype=bool)
    base = eq.pivotality[off]
    lo, hi = np.inf, -np.inf
    for _ in range(probe_count):
        a = rng.uniform(-bound, bound, size=spec.m)
        r = kernels.rjk_matrix(a, field.totals, field.weights)
        ratios = r[off] / base
        lo = min(lo, float(ratios.min()))
        hi = max(hi, float(ratios.max()))
    half_width = 16.0 / math.sqrt(spec.c)
    return Lemma1Block(ratio_min=lo, ratio_max=hi,
                       band_low=math.exp(-half_width), band_high=math.exp(half_width),
                       probes=probe_count)


@dataclass(frozen=True, eq=False)
class EfficiencyBlock:
    efficiency_prob: float
    realized_efficiency_freq: float
    mean_probs: np.ndarray
    util_argmax_freq: np.ndarray
    welfare_qtm: float
    welfare_opt: float
    pivotality: np.ndarray
    pivotality_se: np.ndarray
    theta: float
    xi: float


def efficiency_report(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int = 100_000,
                      seed: int = 0, sim: SimData | None = None) -> EfficiencyBlock:
    """Expected selection probability at the realized utilitarian argmax, plus welfare."""
    data = sim if sim is not None else simulate(eq, spec, dist, trials, seed)
    t = data.probs.shape[0]
    idx = np.arange(t)
    eff = float(data.probs[idx, data.util_argmax].mean())
    realized = float(np.mean(data.draws == data.util_argmax))
    mean_probs = data.probs.mean(axis=0)
    util_freq = np.bincount(data.util_argmax, minlength=spec.m) / t
    welfare_qtm = float((data.probs * data.type_totals).sum(axis=1).mean())
    welfare_opt = float(data.type_totals.max(axis=1).mean())
    piv = np.einsum("nj,nk->jk", data.probs, data.probs) / t
    second = np.einsum("nj,nk->jk", data.probs * data.probs, data.probs * data.probs) / t
    piv_se = np.sqrt(np.maximum(second - piv * piv, 0.0) / t)
    off = ~np.eye(spec.m, dtype=bool)
    theta = spec.n * float(piv[off].max())
    best = int(eq.summary.sort_permutation[0])
    others = [k for k in range(spec.m) if k != best]
    xi = spec.n * float(piv[best, others].max())
    return EfficiencyBlock(efficiency_prob=eff, realized_efficiency_freq=realized,
                           mean_probs=mean_probs, util_argmax_freq=util_freq,
                           welfare_qtm=welfare_qtm, welfare_opt=welfare_opt,
                           pivotality=piv, pivotality_se=piv_se, theta=theta, xi=xi)


@dataclass(frozen=True, eq=False)
class PluralityBlock:
    win_freq: np.ndarray
    efficiency_prob: float
    welfare_plurality: float


def plurality_baseline(spec: ProblemSpec, dist, trials: int = 100_000, seed: int = 0) -> PluralityBlock:
    """Sincere plurality: each agent votes for its own argmax, ties uniform.

    Reports per-alternative win frequencies, the frequency of picking the
    utilitarian argmax, and realized welfare under the plurality winner.
    """
    rng = rng_from(seed, "plurality")
    m = spec.m
    if isinstance(dist, Discrete):
        counts = rng.multinomial(spec.n, dist.probs, size=trials)
        votes = np.zeros((trials, m))
        for t in range(dist.support_size):
            vals = dist.atoms[t]
            arg_set = np.flatnonzero(vals == vals.max())
            if arg_set.size == 1:
                votes[:, arg_set[0]] += counts[:, t]
            else:
                split = multinomial_rows(rng, counts[:, t], np.full(arg_set.size, 1.0 / arg_set.size))
                votes[:, arg_set] += split
        type_totals = counts @ dist.atoms
    else:
        votes = np.zeros((trials, m))
        type_totals = np.empty((trials, m))
        done = 0
        while done < trials:
            rows = min(SIM_CHUNK, trials - done)
            draws = dist.sample(rng, rows * spec.n).reshape(rows, spec.n, m)
            type_totals[done:done + rows] = draws.sum(axis=1)
            agent_arg = np.argmax(draws, axis=2)
            flat = (np.arange(rows)[:, None] * m + agent_arg).ravel()
            votes[done:done + rows] = np.bincount(flat, minlength=rows * m).reshape(rows, m)
            done += rows
    # integer counts plus sub-unit jitter: argmax with uniform tie-breaking
    winner = np.argmax(votes + 0.5 * rng.random((trials, m)), axis=1)
    util_argmax = np.argmax(type_totals, axis=1)
    win_freq = np.bincount(winner, minlength=m) / trials
    eff = float(np.mean(winner == util_argmax))
    welfare = float(type_totals[np.arange(trials), winner].mean())
    return PluralityBlock(win_freq=win_freq, efficiency_prob=eff, welfare_plurality=welfare)


@dataclass(frozen=True)
class VoteBoundsBlock:
    violation_freq: float
    cap: float
    epsilon: float
    delta_hat: float


def vote_bounds_check(eq: EquilibriumResult, spec: ProblemSpec, dist, trials: int = 100_000,
                      epsilon: float | None = None, seed: int = 0,
                      sim: SimData | None = None) -> VoteBoundsBlock:
    """Per-trial check of the equilibrium vote-total bounds.

    Scaled totals 2c V_j / n must sit between mean-gap weighted pivotality
    sums; the measured per-type pivotality deviation delta_hat replaces the
    theory's delta_n, and the failure frequency is compared against the
    2m exp(-2 n eps^2) cap.
    """
    summary = eq.summary
    delta = summary.delta
    if epsilon is None:
        epsilon = delta / 8.0
    if epsilon < 0 or epsilon > delta / 4.0 + 1e-15:
        raise ConfigError("diagnostics.epsilon: must lie in [0, delta/4]")
    data = sim if sim is not None else simulate(eq, spec, dist, trials, seed)
    perm = summary.sort_permutation
    mu = summary.means[perm]
    piv = eq.pivotality[np.ix_(perm, perm)]
    ratio = (eq.delta_hat / delta) if delta > 0 else 0.0
    m = spec.m
    upper = np.empty(m)
    lower = np.empty(m)
    for j in range(m):
        ahead = np.arange(0, j)
        behind = np.arange(j + 1, m)
        gaps_up = mu[j] - mu + 2.0 * epsilon
        gaps_dn = mu[j] - mu - 2.0 * epsilon
        upper[j] = (1.0 - 3.0 * ratio) * float(gaps_up[ahead] @ piv[j, ahead]) \
            + (1.0 + 5.0 * ratio) * float(gaps_up[behind] @ piv[j, behind])
        lower[j] = (1.0 + 5.0 * ratio) * float(gaps_dn[ahead] @ piv[j, ahead]) \
            + (1.0 - 3.0 * ratio) * float(gaps_dn[behind] @ piv[j, behind])
    lhs = 2.0 * spec.c * data.totals[:, perm] / spec.n
    slack = 1e-12 * (1.0 + np.abs(upper) + np.abs(lower))
    bad = (lhs > upper[None, :] + slack[None, :]) | (lhs < lower[None, :] - slack[None, :])
    freq = float(bad.any(axis=1).mean())
    cap = 2.0 * m * math.exp(-2.0 * spec.n * epsilon ** 2)
    return VoteBoundsBlock(violation_freq=freq, cap=cap, epsilon=float(epsilon),
                           delta_hat=float(eq.delta_hat))


@dataclass(eq=False)
class DiagnosticsReport:
    trials: int
    seed: int
    efficiency: EfficiencyBlock
    theorem1: Theorem1Block
    concentration: ConcentrationBlock
    extremes: ExtremesBlock
    lemma1: Lemma1Block
    plurality: PluralityBlock
    vote_bounds: VoteBoundsBlock


def run_diagnostics(eq: EquilibriumResult, spec: ProblemSpec, dist,
                    config: DiagnosticsConfig | None = None) -> DiagnosticsReport:
    """All diagnostic blocks on one shared profile sample."""
    cfg = config or DiagnosticsConfig()
    if not eq.converged:
        raise ValueError("diagnostics need a converged equilibrium")
    sim = simulate(eq, spec, dist, cfg.trials, stable_seed(cfg.seed, "sim"))
    eff = efficiency_report(eq, spec, dist, sim=sim)
    th1 = theorem1_check(eq, spec, dist, sim=sim)
    conc = winner_concentration(sim)
    ext = extremes_check(eq, spec, dist, sim=sim)
    lem = lemma1_check(eq, spec, dist, probe_count=cfg.probe_count, seed=cfg.seed)
    plu = plurality_baseline(spec, dist, trials=cfg.trials, seed=cfg.seed)
    vb = vote_bounds_check(eq, spec, dist, epsilon=cfg.epsilon, sim=sim)
    return DiagnosticsReport(trials=cfg.trials, seed=cfg.seed, efficiency=eff, theorem1=th1,
                             concentration=conc, extremes=ext, lemma1=lem, plurality=plu,
                             vote_bounds=vb)


def report_to_dict(rep: DiagnosticsReport) -> dict:
    return {
        "trials": int(rep.trials),
        "seed": int(rep.seed),
        "efficiency": {
            "efficiency_prob": rep.efficiency.efficiency_prob,
            "realized_efficiency_freq": rep.efficiency.realized_efficiency_freq,
            "mean_probs": rep.efficiency.mean_probs.tolist(),
            "util_argmax_freq": rep.efficiency.util_argmax_freq.tolist(),
            "welfare_qtm": rep.efficiency.welfare_qtm,
            "welfare_opt": rep.efficiency.welfare_opt,
            "pivotality": rep.efficiency.pivotality.tolist(),
            "pivotality_se": rep.efficiency.pivotality_se.tolist(),
            "theta": rep.efficiency.theta,
            "xi": rep.efficiency.xi,
        },
        "theorem1": {
            "beta_estimate": rep.theorem1.beta_estimate,
            "beta_se": rep.theorem1.beta_se,
            "warned": rep.theorem1.warned,
        },
        "winner_concentration": {
            "grid": rep.concentration.grid.tolist(),
            "cdf": rep.concentration.winner_cdf.tolist(),
        },
        "extremes": {"frequency": rep.extremes.frequency, "bound": rep.extremes.bound},
        "lemma1": {
            "ratio_min": rep.lemma1.ratio_min,
            "ratio_max": rep.lemma1.ratio_max,
            "band_low": rep.lemma1.band_low,
            "band_high": rep.lemma1.band_high,
            "probes": rep.lemma1.probes,
        },
        "plurality": {
            "win_freq": rep.plurality.win_freq.tolist(),
            "efficiency_prob": rep.plurality.efficiency_prob,
            "welfare_plurality": rep.plurality.welfare_plurality,
        },
        "vote_bounds": {
            "violation_freq": rep.vote_bounds.violation_freq,
            "cap": rep.vote_bounds.cap,
            "epsilon": rep.vote_bounds.epsilon,
            "delta_hat": rep.vote_bounds.delta_hat,
        },
    }
