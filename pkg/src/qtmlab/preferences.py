"""Type distributions over agent values and their summaries.

Values live in [0, u_max]^m. Two families are supported: finite-support
Discrete distributions and IndependentMarginals built from a small catalog
(uniform, rescaled beta, point mass).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MEAN_GAP_TOL = 1e-9
AXIS_RADIUS_FRAC = 0.05  # assumption-2 proxy: radius around the axis points, as a fraction of u_max


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float
    kind: str = field(default="uniform", init=False)

    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=size)


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float
    scale: float = 1.0
    kind: str = field(default="beta", init=False)

    def mean(self) -> float:
        return self.scale * self.alpha / (self.alpha + self.beta)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.scale * rng.beta(self.alpha, self.beta, size=size)


@dataclass(frozen=True)
class PointMass:
    value: float
    kind: str = field(default="point", init=False)

    def mean(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, self.value, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Discrete:
    """Finite support: atoms (s, m) with probabilities (s,)."""

    probs: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        object.__setattr__(self, "atoms", np.asarray(self.atoms, dtype=np.float64))
        if self.atoms.ndim != 2 or self.probs.ndim != 1 or self.probs.shape[0] != self.atoms.shape[0]:
            raise ConfigError("distribution.atoms: need matching probability and value rows")
        if self.probs.shape[0] < 1:
            raise ConfigError("distribution.atoms: at least one atom required")
        if np.any(self.probs <= 0):
            raise ConfigError("distribution.atoms: probabilities must be positive")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ConfigError("distribution.atoms: probabilities must sum to 1 within 1e-12")

    @property
    def m(self) -> int:
        return self.atoms.shape[1]

    @property
    def support_size(self) -> int:
        return self.atoms.shape[0]

    def means(self) -> np.ndarray:
        return self.probs @ self.atoms

    def sample_indices(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.choice(self.support_size, size=count, p=self.probs)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.atoms[self.sample_indices(rng, count)]


@dataclass(frozen=True, eq=False)
class IndependentMarginals:
    """Product distribution, one catalog marginal per alternative."""

    marginals: tuple

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if len(self.marginals) < 2:
            raise ConfigError("distribution.marginals: need one marginal per alternative, m >= 2")

    @property
    def m(self) -> int:
        return len(self.marginals)

    def means(self) -> np.ndarray:
        return np.array([mg.mean() for mg in self.marginals])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.empty((count, self.m))
        for j, mg in enumerate(self.marginals):
            out[:, j] = mg.sample(rng, count)
        return out


@dataclass(frozen=True)
class Assumption2Verdict:
    alternative: int
    passed: bool
    note: str


@dataclass(frozen=True, eq=False)
class DistributionSummary:
    means: np.ndarray
    delta: float
    sort_permutation: np.ndarray
    assumption1_ok: bool
    assumption2_report: tuple


@dataclass(frozen=True, eq=False)
class BeliefProfile:
    """Population groups, each with a fraction and its believed distribution."""

    fractions: tuple
    distributions: tuple

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        object.__setattr__(self, "distributions", tuple(self.distributions))
        if len(self.fractions) != len(self.distributions) or not self.fractions:
            raise ConfigError("beliefs.groups: need one fraction per distribution")
        if any(f <= 0 for f in self.fractions):
            raise ConfigError("beliefs.groups: fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise ConfigError("beliefs.groups: fractions must sum to 1 within 1e-12")
        ms = {d.m for d in self.distributions}
        if len(ms) != 1:
            raise ConfigError("beliefs.groups: all believed distributions must share m")


def validate_distribution(dist, u_max: float):
    """Check the distribution's support sits inside [0, u_max]^m."""
    if isinstance(dist, Discrete):
        if np.any(dist.atoms < 0) or np.any(dist.atoms > u_max + 1e-12):
            raise ConfigError("distribution.atoms: values must lie in [0, u_max]")
    elif isinstance(dist, IndependentMarginals):
        for j, mg in enumerate(dist.marginals):
            if isinstance(mg, Uniform):
                if not (0 <= mg.low < mg.high <= u_max + 1e-12):
                    raise ConfigError(f"distribution.marginals[{j}]: uniform needs 0 <= low < high <= u_max")
            elif isinstance(mg, Beta):
                if mg.alpha <= 0 or mg.beta <= 0:
                    raise ConfigError(f"distribution.marginals[{j}]: beta needs positive shape parameters")
                if not (0 < mg.scale <= u_max + 1e-12):
                    raise ConfigError(f"distribution.marginals[{j}]: beta scale must lie in (0, u_max]")
            elif isinstance(mg, PointMass):
                if not (0 <= mg.value <= u_max + 1e-12):
                    raise ConfigError(f"distribution.marginals[{j}]: point mass must lie in [0, u_max]")
            else:
                raise ConfigError(f"distribution.marginals[{j}]: unknown marginal kind")
    else:
        raise ConfigError("distribution: unknown distribution kind")
    return dist


def sample_types(dist, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` iid type vectors, shape (count, m)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return dist.sample(rng, count)


def _assumption2_discrete(dist: Discrete, u_max: float):
    radius = AXIS_RADIUS_FRAC * u_max
    report = []
    for j in range(dist.m):
        off = np.delete(dist.atoms, j, axis=1)
        best = float(np.sqrt((off * off).sum(axis=1)).min())
        if best <= radius:
            note = f"support point within {radius:g} of the alternative-{j} axis"
            report.append(Assumption2Verdict(j, True, note))
        else:
            note = (f"fails/not verifiable: nearest support point is {best:g} from the "
                    f"alternative-{j} axis, radius {radius:g}")
            report.append(Assumption2Verdict(j, False, note))
    return tuple(report)


def _marginal_has_mass_below(mg, x: float) -> bool:
    if isinstance(mg, Uniform):
        return mg.low < x
    if isinstance(mg, Beta):
        return True  # density positive on (0, scale)
    return mg.value < x


def _marginal_has_positive_support(mg) -> bool:
    if isinstance(mg, Uniform):
        return mg.high > 0
    if isinstance(mg, Beta):
        return True
    return mg.value > 0


def _assumption2_marginals(dist: IndependentMarginals, u_max: float):
    radius = AXIS_RADIUS_FRAC * u_max
    report = []
    for j in range(dist.m):
        own_ok = _marginal_has_positive_support(dist.marginals[j])
        others_ok = all(_marginal_has_mass_below(dist.marginals[k], radius)
                        for k in range(dist.m) if k != j)
        if own_ok and others_ok:
            report.append(Assumption2Verdict(j, True, f"positive density near the alternative-{j} axis"))
        else:
            why = "no positive own-value mass" if not own_ok else "some other coordinate has no mass near 0"
            report.append(Assumption2Verdict(j, False, f"fails/not verifiable: {why}"))
    return tuple(report)


def summarize(dist, u_max: float = 1.0) -> DistributionSummary:
    """Means, the minimal sorted-mean gap delta, and assumption checks.

    The assumption checks are advisory: distinct means within 1e-9, and
    support mass near each alternative's axis (checked with a fixed radius
    proxy, so finite-support distributions usually report a failure).
    """
    means = dist.means()
    order = np.argsort(-means, kind="stable")
    sorted_means = means[order]
    gaps = sorted_means[:-1] - sorted_means[1:]
    delta = float(gaps.min()) if gaps.size else 0.0
    assumption1_ok = bool(gaps.size == 0 or gaps.min() > MEAN_GAP_TOL)
    if isinstance(dist, Discrete):
        a2 = _assumption2_discrete(dist, u_max)
    else:
        a2 = _assumption2_marginals(dist, u_max)
    return DistributionSummary(means=means, delta=delta, sort_permutation=order,
                               assumption1_ok=assumption1_ok, assumption2_report=a2)


def log_utility_marginal(wealth: float) -> float:
    """Marginal utility 1 / w of log wealth utility."""
    return 1.0 / wealth


def power_utility_marginal(gamma: float):
    """Marginal utility gamma * w^(gamma - 1) of power wealth utility."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    def gprime(wealth: float) -> float:
        return gamma * wealth ** (gamma - 1.0)

    return gprime


def risk_adjusted_values(u: np.ndarray, wealth: float, marginal_utility) -> np.ndarray:
    """Divide raw values by the marginal utility of wealth.

    With concave wealth utility this converts money-denominated values into
    the units the mechanism actually trades in.
    """
    g = float(marginal_utility(wealth))
    if not (g > 0 and math.isfinite(g)):
        raise ValueError("marginal utility must be positive and finite at the given wealth")
    return np.asarray(u, dtype=np.float64) / g
