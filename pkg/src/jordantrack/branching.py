"""Galton-Watson and branching-random-walk analytics.

Closed forms and bisection solvers for the extinction probability of the
Binomial(d, p) offspring process and for the first-passage time constant of
the continuous-SI front, plus a desk-scale empirical front-speed estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .growth import CSI, StopCondition, UnderlyingTreeSpec, new_state, new_tree, run_csi, trial_rng

BRACKET_TOL = 1e-12


@dataclass(frozen=True)
class BranchingSpec:
    """Offspring law Binomial(d, p), one initial individual."""

    p: float
    d: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    def pgf(self, s: float) -> float:
        return (1.0 - self.p + self.p * s) ** self.d

    @property
    def mean(self) -> float:
        return self.p * self.d


@dataclass(frozen=True)
class FirstPassageSpec:
    """Tail-window parameters for the first-birth time B_n.

    The constants c1, c2, c3 and delta come from the underlying concentration
    inequalities only existentially; they are caller-supplied knobs, never
    derived here, and the defaults are illustrative.
    """

    d: int
    gamma: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


def gw_extinction_prob(spec: BranchingSpec) -> float:
    """Smallest fixed point q of the offspring pgf f(s) = (1-p+ps)^d on [0,1].

    q = 1 exactly when pd <= 1 (aside from the deterministic p = 1 case);
    survival probability is 1 - q.
    """
    if spec.p == 1.0:
        return 0.0
    if spec.mean <= 1.0:
        return 1.0
    f = spec.pgf
    # f(s) - s is positive on [0, q) and negative on (q, 1); find a negative
    # bracket endpoint first, then bisect
    hi = 0.5
    while f(hi) - hi > 0.0:
        hi = 0.5 * (hi + 1.0)
        if 1.0 - hi < 1e-15:
            break
    lo = 0.0
    while hi - lo > BRACKET_TOL * 0.01:
        mid = 0.5 * (lo + hi)
        if f(mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    # polish: f is a contraction near its smallest fixed point
    for _ in range(8):
        q = f(q)
    return q


def gw_extinction_monte_carlo(spec: BranchingSpec, trials: int,
                              rng: np.random.Generator,
                              max_generations: int = 200,
                              survival_cap: int = 1_000_000) -> float:
    """Monte-Carlo extinction frequency of the Binomial(d, p) process.

    Vectorized over trials: a generation of z individuals spawns
    Binomial(z*d, p) offspring in total. Populations reaching survival_cap
    are scored as surviving (their residual extinction mass is below any
    tolerance used here).
    """
    z = np.ones(trials, dtype=np.int64)
    for _ in range(max_generations):
        active = (z > 0) & (z < survival_cap)
        if not active.any():
            break
        z_act = z[active]
        z[active] = rng.binomial(z_act * spec.d, spec.p)
    return float(np.count_nonzero(z == 0)) / trials


def phi(theta: float, d: int) -> float:
    """Laplace transform of the first-generation birth times: d/(1+theta)."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    return d / (1.0 + theta)


def mu(a: float, d: int) -> float:
    """Growth exponent a*d*e^(1-a), the closed form of inf_theta e^(theta a) phi(theta).

    The closed form matches the infimum form on 0 < a <= 1, which is the
    region the time constant lives in.
    """
    if a <= 0:
        raise ValueError("a must be > 0")
    return a * d * math.exp(1.0 - a)


def mu_infimum(a: float, d: int, grid: int = 20000, theta_max: float = 200.0) -> float:
    """Numerical evaluation of inf over theta >= 0 of e^(theta a) * d/(1+theta).

    Kept independent of mu() so the two sides cross-check each other.
    """
    if a <= 0:
        raise ValueError("a must be > 0")
    thetas = np.linspace(0.0, theta_max, grid)
    vals = np.exp(thetas * a) * d / (1.0 + thetas)
    lo = max(0, int(np.argmin(vals)) - 2)
    hi = min(grid - 1, int(np.argmin(vals)) + 2)
    fine = np.linspace(thetas[lo], thetas[hi], 20001)
    return float(np.min(np.exp(fine * a) * d / (1.0 + fine)))


def time_constant_gamma(d: int) -> float:
    """Time constant gamma = inf{a : mu(a) >= 1}, bisected on (0, 1).

    mu is strictly increasing on (0, 1) with mu(0+) = 0 and mu(1) = d >= 2,
    so the root is unique.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    lo, hi = 1e-12, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mu(mid, d) >= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= BRACKET_TOL:
            break
    gamma = 0.5 * (lo + hi)
    if abs(mu(gamma, d) - 1.0) > 1e-9:
        raise ArithmeticError("gamma bisection failed to converge")
    return gamma


def first_passage_windows(spec: FirstPassageSpec, n: int, x: float) -> tuple[float, float]:
    """Lower/upper first-passage thresholds around gamma*n.

    t1 = gamma*n + c1*log(n) - x bounds the early tail, and
    t2 = gamma*(n - c3*log n) + c2*log(n - c3*log n) + x the late tail of the
    shortened level.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    shortened = n - spec.c3 * math.log(n)
    if shortened <= 0:
        raise ValueError("n too small: n - c3*log(n) must be positive")
    t1 = spec.gamma * n + spec.c1 * math.log(n) - x
    t2 = spec.gamma * shortened + spec.c2 * math.log(shortened) + x
    return t1, t2


@dataclass
class FrontSpeedResult:
    slope: float
    intercept: float
    n_range: tuple[int, int]
    trials: int
    samples: list[list[float]]  # samples[i] = per-trial first-passage times of level n_lo + i
    truncated: bool = False


def estimate_front_speed(d: int, n_range: tuple[int, int], trials: int,
                         master_seed: int = 0,
                         max_events_per_trial: int = 2_000_000) -> FrontSpeedResult:
    """Empirical continuous-SI front speed: regress the first time each depth
    level is reached on the level index; the slope estimates gamma."""
    n_lo, n_hi = n_range
    if not (1 <= n_lo < n_hi):
        raise ValueError("need 1 <= n_lo < n_hi")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = UnderlyingTreeSpec(kind="regular", d=d)
    stop = StopCondition(max_depth=n_hi, max_events=max_events_per_trial)
    samples: list[list[float]] = [[] for _ in range(n_hi - n_lo + 1)]
    truncated = False
    for trial in range(trials):
        rng = trial_rng(master_seed, trial)
        tree = new_tree(spec, rng)
        state = new_state(CSI, tree, spec, rng=rng)
        run_csi(state, tree, rng, stop)
        if state.truncated or len(state.depth_first_time) <= n_hi:
            truncated = True
            continue
        for n in range(n_lo, n_hi + 1):
            samples[n - n_lo].append(state.depth_first_time[n])
    xs, ys = [], []
    for i, times in enumerate(samples):
        xs.extend([n_lo + i] * len(times))
        ys.extend(times)
    if len(xs) < 2:
        raise ArithmeticError("front-speed regression has no usable samples")
    slope, intercept = np.polyfit(np.asarray(xs, dtype=float), np.asarray(ys), 1)
    return FrontSpeedResult(float(slope), float(intercept), (n_lo, n_hi),
                            trials, samples, truncated)
