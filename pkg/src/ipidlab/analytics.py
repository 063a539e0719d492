"""Collision and adversarial-guess probabilities for every selection method.

Traffic is modeled as a Poisson process: N, the number of packets in
transit (or sent since the adversary's last probe), has mean lambda per
unit time. Counter-based methods collide only after exhausting all 2^16
values; PRNG-based methods follow the birthday problem over the 2^16 - k
values outside the non-repetition window. Guess probabilities are the
mass of the g most likely next values.

All Poisson arithmetic is done in log space; infinite sums are truncated
to the interval where the pmf exceeds 5e-324 (everything representable).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .constants import IPID_SPACE

__all__ = [
    "DistributionTable",
    "GuessResult",
    "TrafficModel",
    "collision_prob_counter",
    "collision_prob_prng",
    "conditional_collision_birthday",
    "guess_prob_bucket",
    "guess_prob_counter",
    "guess_prob_per_connection",
    "guess_prob_prng",
    "next_ipid_distribution_counter",
    "poisson_cdf",
    "poisson_logpmf",
    "poisson_pmf",
    "poisson_sf",
    "truncation_bound",
    "worst_case_lambda_i",
]

# Poisson mass below this is not representable as a float; sums over n
# are truncated where the pmf drops under it.
PMF_FLOOR = 5e-324
_LOG_PMF_FLOOR = math.log(PMF_FLOOR)


def _check_rate(lam: float, name: str = "lambda") -> float:
    lam = float(lam)
    if not lam > 0 or math.isinf(lam):
        raise ValueError(f"{name} must be a positive finite rate, got {lam}")
    return lam


def _check_guesses(g: int) -> int:
    g = int(g)
    if not 1 <= g <= IPID_SPACE:
        raise ValueError(f"g must be in [1, 2^16], got {g}")
    return g


def _check_reserved(k: int) -> int:
    k = int(k)
    if not 0 <= k < IPID_SPACE:
        raise ValueError(f"k must be in [0, 2^16), got {k}")
    return k


def poisson_logpmf(n, lam: float):
    """log pmf(n, lambda) = n log(lambda) - lambda - log(n!)."""
    lam = _check_rate(lam)
    n = np.asarray(n, dtype=np.float64)
    out = n * math.log(lam) - lam - special.gammaln(n + 1.0)
    return np.where(n >= 0, out, -np.inf)


def poisson_pmf(n, lam: float):
    return np.exp(poisson_logpmf(n, lam))


def poisson_cdf(n, lam: float):
    """P(N <= n); regularized incomplete gamma, stable for large lambda."""
    lam = _check_rate(lam)
    return special.pdtr(np.asarray(n, dtype=np.float64), lam)


def poisson_sf(n, lam: float):
    """P(N > n) as a direct tail evaluation (no 1 - cdf cancellation)."""
    lam = _check_rate(lam)
    return special.pdtrc(np.asarray(n, dtype=np.float64), lam)


def truncation_bound(lam: float) -> tuple[int, int]:
    """Smallest [n_lo, n_hi] outside which pmf(n, lambda) <= 5e-324."""
    lam = _check_rate(lam)
    mode = int(lam)

    def log_at(n: int) -> float:
        return n * math.log(lam) - lam - special.gammaln(n + 1.0)

    if log_at(mode) <= _LOG_PMF_FLOOR:
        # the entire distribution is below the floor (absurdly large
        # lambda); return the mode as a degenerate interval
        return mode, mode

    if log_at(0) > _LOG_PMF_FLOOR:
        lo = 0
    else:
        a, b = 0, mode  # log pmf increases on [0, mode]
        while b - a > 1:
            m = (a + b) // 2
            if log_at(m) > _LOG_PMF_FLOOR:
                b = m
            else:
                a = m
        lo = b

    step = max(16, int(8 * math.sqrt(lam)) + 1)
    hi = mode
    while log_at(hi + step) > _LOG_PMF_FLOOR:
        hi += step
    a, b = hi, hi + step  # log pmf decreases past the mode
    while b - a > 1:
        m = (a + b) // 2
        if log_at(m) > _LOG_PMF_FLOOR:
            a = m
        else:
            b = m
    return lo, a


def collision_prob_counter(lam: float) -> float:
    """Collision probability for sequentially incrementing counters.

    Sequential counters reuse a value only after all 2^16 are exhausted,
    so this is the Poisson tail past 2^16. Applies to globally
    incrementing, per-connection, and per-destination selection.
    """
    return float(poisson_sf(IPID_SPACE, lam))


def conditional_collision_birthday(n: int, k: int = 0) -> float:
    """Birthday collision probability among n uniform values, the most
    recent k of which are guaranteed distinct.

    0 for n <= k; 1 for n > 2^16; otherwise
    1 - prod_{i=0}^{n-k-1} (1 - i / (2^16 - k)), accumulated in log space.
    """
    k = _check_reserved(k)
    n = int(n)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n <= k:
        return 0.0
    if n > IPID_SPACE:
        return 1.0
    i = np.arange(n - k, dtype=np.float64)
    log_no_collision = math.fsum(np.log1p(-i / (IPID_SPACE - k)))
    return float(-np.expm1(log_no_collision))


def collision_prob_prng(lam: float, k: int = 0) -> float:
    """Collision probability for PRNG selection with k reserved values.

    Mixes the birthday term over the truncated Poisson distribution of
    the in-transit count and adds the tail past 2^16 (where collision is
    certain). k=0 is pure PRNG; the searchable queue and the iterated
    shuffle share this formula.
    """
    lam = _check_rate(lam)
    k = _check_reserved(k)
    tail = float(poisson_sf(IPID_SPACE, lam))
    lo, hi = truncation_bound(lam)
    lo = max(lo, k + 1)
    hi = min(hi, IPID_SPACE)
    if hi < lo:
        return tail
    # prefix sums of log(1 - i/(2^16 - k)) give the birthday product for
    # every n in one pass
    i = np.arange(hi - k, dtype=np.float64)
    log_prefix = np.cumsum(np.log1p(-i / (IPID_SPACE - k)))
    ns = np.arange(lo, hi + 1)
    conditional = -np.expm1(log_prefix[ns - k - 1])
    weights = poisson_pmf(ns, lam)
    total = math.fsum(conditional * weights) + tail
    return min(max(total, 0.0), 1.0)  # clear accumulated rounding noise


@dataclass
class DistributionTable:
    """Probability mass over all 2^16 next-IPID values."""

    mass: np.ndarray
    trials: Optional[int] = None  # set when estimated by simulation

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.shape != (IPID_SPACE,):
            raise ValueError(f"mass must have shape ({IPID_SPACE},)")

    def normalize(self) -> "DistributionTable":
        total = self.mass.sum()
        if total <= 0:
            raise ValueError("cannot normalize an empty distribution")
        self.mass = self.mass / total
        return self

    def top_g(self, g: int) -> tuple[np.ndarray, float]:
        """Indices of the g largest masses and their total mass."""
        g = _check_guesses(g)
        if g == IPID_SPACE:
            idx = np.arange(IPID_SPACE)
        else:
            idx = np.argpartition(self.mass, -g)[-g:]
        return idx, float(self.mass[idx].sum())


@dataclass(frozen=True)
class GuessResult:
    """The adversary's g maximum-likelihood guesses and their total mass."""

    guesses: frozenset
    probability: float
    std_err: Optional[float] = None


@dataclass(frozen=True)
class TrafficModel:
    """Poisson traffic description used by sweeps.

    ``lam`` is the total rate per unit time; ``r`` resources split it
    (uniform mode: lambda_i = lam / r); ``g`` is the adversary's guess
    budget; ``k`` the PRNG reserved count; ``t`` ticks per unit time.
    """

    lam: float
    r: int = 1
    g: int = 1
    k: int = 0
    t: int = 3

    def __post_init__(self):
        _check_rate(self.lam)
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        _check_guesses(self.g)
        _check_reserved(self.k)
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")

    @property
    def lambda_uniform(self) -> float:
        return self.lam / self.r


def next_ipid_distribution_counter(
    lam_i: float, baseline: int = 0
) -> DistributionTable:
    """Distribution of the next value of a sequentially incrementing
    counter, one unit time after it was probed at ``baseline``.

    The next value is baseline + N + 1 mod 2^16 with N Poisson; the
    truncated pmf is folded onto the 2^16 residues.
    """
    lam_i = _check_rate(lam_i, "lambda_i")
    lo, hi = truncation_bound(lam_i)
    ns = np.arange(lo, hi + 1)
    pm = poisson_pmf(ns, lam_i)
    mass = np.zeros(IPID_SPACE)
    np.add.at(mass, (baseline + ns + 1) % IPID_SPACE, pm)
    return DistributionTable(mass).normalize()


def guess_prob_counter(lam_i: float, g: int, baseline: int = 0) -> GuessResult:
    """Guess probability against a sequentially incrementing counter
    observed one unit time ago (globally incrementing with lambda_i =
    lambda; per-destination with the destination's own rate)."""
    g = _check_guesses(g)
    table = next_ipid_distribution_counter(lam_i, baseline)
    idx, prob = table.top_g(g)
    return GuessResult(frozenset(int(x) for x in idx), min(prob, 1.0))


def guess_prob_per_connection(g: int) -> float:
    """g / 2^16: connection counters cannot be probed, so guesses are
    blind; rate-independent."""
    return _check_guesses(g) / IPID_SPACE


def guess_prob_prng(g: int, k: int = 0) -> float:
    """min{g / (2^16 - k), 1}: uniform over everything outside the
    non-repetition window; k=0 covers pure PRNG; rate-independent."""
    g = _check_guesses(g)
    k = _check_reserved(k)
    return min(g / (IPID_SPACE - k), 1.0)


def guess_prob_bucket(lam_i: float, g: int, sim=None) -> GuessResult:
    """Guess probability against a stochastically incremented bucket
    counter, estimated by simulating the increment-sum distribution."""
    from . import montecarlo  # deferred: montecarlo depends on this module

    g = _check_guesses(g)
    lam_i = _check_rate(lam_i, "lambda_i")
    if sim is None:
        sim = montecarlo.SimParams()
    table = montecarlo.increment_sum_distribution(lam_i, sim)
    idx, prob = table.top_g(g)
    trials = table.trials or sim.trials
    std_err = math.sqrt(max(prob * (1.0 - prob), 0.0) / trials)
    return GuessResult(frozenset(int(x) for x in idx), min(prob, 1.0), std_err)


# Worst-case search grid: 64 points per decade across 30 octaves of
# lambda_i below lambda, endpoints included. Guess probability varies
# smoothly in log lambda_i, so this resolution suffices.
_WORST_CASE_LOG2_SPAN = 30.0
_WORST_CASE_POINTS_PER_DECADE = 64


def _worst_case_grid(lam: float) -> np.ndarray:
    decades = _WORST_CASE_LOG2_SPAN * math.log10(2.0)
    n = int(math.ceil(_WORST_CASE_POINTS_PER_DECADE * decades)) + 1
    exps = np.linspace(0.0, _WORST_CASE_LOG2_SPAN, n)
    return lam * np.power(2.0, -exps)


def worst_case_lambda_i(
    method: str, lam: float, r: int, g: int, sim=None, k: int = 0
) -> tuple[float, float]:
    """The per-resource rate in (0, lambda] that maximizes the guess
    probability, and that probability.

    With one resource (r = 1) the only feasible rate is lambda itself.
    PRNG methods (``k`` reserved values) and per-connection are
    rate-independent, so any rate is "worst". Counter and bucket methods
    are grid-searched.
    """
    from .selectors import (
        METHOD_GLOBAL,
        METHOD_PER_BUCKET_EXCLUSIVE,
        METHOD_PER_BUCKET_RACY,
        METHOD_PER_CONNECTION,
        METHOD_PER_DESTINATION,
        METHOD_PRNG_PURE,
        METHOD_PRNG_QUEUE,
        METHOD_PRNG_SHUFFLE,
    )

    lam = _check_rate(lam)
    g = _check_guesses(g)
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")

    if method == METHOD_PER_CONNECTION:
        return lam, guess_prob_per_connection(g)
    if method in (METHOD_PRNG_PURE, METHOD_PRNG_QUEUE, METHOD_PRNG_SHUFFLE):
        return lam, guess_prob_prng(g, k)
    if method == METHOD_GLOBAL or r == 1:
        if method in (METHOD_PER_BUCKET_EXCLUSIVE, METHOD_PER_BUCKET_RACY):
            res = guess_prob_bucket(lam, g, sim)
            return lam, res.probability
        return lam, guess_prob_counter(lam, g).probability

    if method == METHOD_PER_DESTINATION:
        evaluate = lambda x: guess_prob_counter(x, g).probability
    elif method in (METHOD_PER_BUCKET_EXCLUSIVE, METHOD_PER_BUCKET_RACY):
        evaluate = lambda x: guess_prob_bucket(x, g, sim).probability
    else:
        raise ValueError(f"unknown method {method!r}")

    candidates = np.append(_worst_case_grid(lam), lam / r)  # probe uniform too
    best_lam_i = lam
    best_prob = -1.0
    for lam_i in candidates:
        prob = evaluate(float(lam_i))
        if prob > best_prob:
            best_prob = prob
            best_lam_i = float(lam_i)
    return best_lam_i, best_prob
