"""Core mechanism primitives.

An instance has m alternatives, n agents, a quadratic vote cost c and a value
scale u_max. Each agent submits one signed vote per alternative; the winner is
drawn from the softmax of the vote totals. Vote costs are rebated equally to
the other n - 1 agents, so the mechanism never burns money.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import VoteBoxError

PROB_TOL = 1e-12
BOX_SLACK = 1e-9


@dataclass(frozen=True)
class ProblemSpec:
    """Instance parameters: alternatives, agents, vote cost, value scale."""

    m: int
    n: int
    c: float
    u_max: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("m must be an integer >= 2")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be an integer >= 1")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("c must be a positive finite number")
        if not (self.u_max > 0 and math.isfinite(self.u_max)):
            raise ValueError("u_max must be a positive finite number")

    @property
    def vote_bound(self) -> float:
        return vote_box_bound(self)


@dataclass(frozen=True)
class PayoffBreakdown:
    choice_value: float
    own_cost: float
    rebate: float
    total: float


def vote_box_bound(spec: ProblemSpec) -> float:
    """Half-width of the admissible vote box, sqrt(u_max / c)."""
    return math.sqrt(spec.u_max / spec.c)


def check_votes(a: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Validate one vote vector against the box; returns it as a float array."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (spec.m,):
        raise ValueError(f"vote vector must have shape ({spec.m},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise VoteBoxError("vote vector has non-finite entries")
    bound = vote_box_bound(spec)
    worst = float(np.abs(a).max())
    if worst > bound + BOX_SLACK:
        raise VoteBoxError(f"vote magnitude {worst} exceeds the box bound {bound}")
    return a


def tally(profile) -> np.ndarray:
    """Sum a (k, m) stack of vote vectors into vote totals."""
    arr = np.asarray(profile, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("vote profile must be a 2-d array of vote vectors")
    return arr.sum(axis=0)


def select_probs(totals: np.ndarray) -> np.ndarray:
    """Softmax of the vote totals. Subtracts the max so any finite totals work."""
    v = np.asarray(totals, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError("vote totals must be a 1-d array of length >= 2")
    if not np.all(np.isfinite(v)):
        raise ValueError("vote totals must be finite")
    z = v - v.max()
    np.exp(z, out=z)
    z /= z.sum()
    return z


def select_probs_given_own_vote(a: np.ndarray, totals_minus: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Selection probabilities seen by one agent holding the others fixed."""
    a = check_votes(a, spec)
    v = np.asarray(totals_minus, dtype=np.float64)
    if v.shape != a.shape:
        raise ValueError("opponent totals and own vote must have matching shape")
    return select_probs(v + a)


def payoff(u: np.ndarray, a: np.ndarray, others, spec: ProblemSpec) -> PayoffBreakdown:
    """Expected utility split into chosen value, own cost and rebate.

    `others` holds the n - 1 opponent vote vectors; their costs come back as
    the rebate. With n = 1 there is nobody to rebate to and `others` must be
    empty.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.m,):
        raise ValueError(f"utility vector must have shape ({spec.m},), got {u.shape}")
    a = check_votes(a, spec)
    others = np.asarray(others, dtype=np.float64).reshape(-1, spec.m) if len(others) else np.zeros((0, spec.m))
    if others.shape[0] != spec.n - 1:
        raise ValueError(f"expected {spec.n - 1} opponent vote vectors, got {others.shape[0]}")
    probs = select_probs(tally(others) + a) if spec.n > 1 else select_probs(a)
    choice_value = float(probs @ u)
    own_cost = float(spec.c * (a @ a))
    rebate = 0.0 if spec.n == 1 else float(spec.c / (spec.n - 1) * (others * others).sum())
    return PayoffBreakdown(choice_value, own_cost, rebate, choice_value - own_cost + rebate)


def selection_derivatives(a: np.ndarray, totals_minus: np.ndarray) -> np.ndarray:
    """Jacobian d q_k / d a_j of the selection probabilities at a fixed field.

    Entry (j, k) is -q_j q_k off the diagonal and q_j (1 - q_j) on it.
    """
    q = select_probs(np.asarray(totals_minus, dtype=np.float64) + np.asarray(a, dtype=np.float64))
    return np.diag(q) - np.outer(q, q)


def check_probs(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("probability vector must be 1-d")
    if abs(float(q.sum()) - 1.0) > PROB_TOL or np.any(q <= 0):
        raise ValueError("selection probabilities must be positive and sum to 1")
    return q


def draw_outcome(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw the winning alternative index from the selection lottery."""
    q = check_probs(probs)
    cum = np.cumsum(q)
    x = rng.random()
    return int(min(np.searchsorted(cum, x, side="right"), q.shape[0] - 1))


def draw_outcomes(prob_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draw, one winner per row of selection probabilities."""
    q = np.asarray(prob_rows, dtype=np.float64)
    cum = np.cumsum(q, axis=1)
    x = rng.random(q.shape[0])
    idx = (x[:, None] > cum).sum(axis=1)
    return np.minimum(idx, q.shape[1] - 1)
