"""Best-response iteration to the providers' equilibrium, and its Monte-Carlo harness."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from ._validation import check_int, check_real
from .exceptions import ConfigError, NonconvergenceError
from .foc import Duopoly, best_response, newton, payoff, residuals, _raw_residuals
from .model import EquilibriumResult, GovernmentPolicy, MarketConfig, StrategyProfile, TraceRecord

DEFAULT_EPSILON = 1e-3
DEFAULT_MAX_ITER = 1000


def _profile(own1, own2):
    return StrategyProfile.from_flat(own1[0], own1[1], own2[0], own2[1], own1[2], own2[2])


def refine_equilibrium(game, strategies, kinds, lams):
    """Solve both providers' first-order systems jointly from a converged point.

    Each provider contributes its fee and two spend conditions plus either the
    binding budget (``kind == "budget"``) or a zero multiplier. Returns the
    refined pair of strategies, or None when Newton fails or leaves the domain.
    """
    if any(k not in ("budget", "interior") for k in kinds):
        return None
    z0 = [*strategies[0], lams[0], *strategies[1], lams[1]]
    budgets = game.budgets

    def fun(z):
        own = (z[0:3], z[4:7])
        lam = (z[3], z[7])
        out = []
        for j in (0, 1):
            s1, s2, f = own[j]
            if min(s1, s2) <= game.floor:
                return None
            try:
                r_f, e1, e2 = _raw_residuals(game, own[j], own[1 - j])
            except ZeroDivisionError:
                return None
            last = (s1 + s2 - budgets[j]) / budgets[j] if kinds[j] == "budget" else lam[j]
            out += [r_f / game.total, e1 - lam[j], e2 - lam[j], last]
        return out

    z, _, ok = newton(fun, z0, tol=1e-13, steps=[1e-8] * 8)
    if not ok:
        return None
    own = (tuple(float(v) for v in z[0:3]), tuple(float(v) for v in z[4:7]))
    new_lams = (float(z[3]), float(z[7]))
    for j in (0, 1):
        s1, s2, f = own[j]
        if f < 0 or f > game.scale * math.sqrt(min(s1, s2)):
            return None
        if kinds[j] == "budget" and new_lams[j] < 0:
            return None
        if kinds[j] == "interior" and s1 + s2 > budgets[j] * (1 + 1e-12):
            return None
        scale = max(1.0, budgets[j])
        if max(abs(a - b) for a, b in zip(own[j], strategies[j])) > 1e-2 * scale:
            return None
        res = residuals(game, (*own[j], new_lams[j]), own[1 - j], budgets[j])
        if not res.ok():
            return None
    return own


def solve_equilibrium(
    cfg,
    policy,
    epsilon=DEFAULT_EPSILON,
    max_iter=DEFAULT_MAX_ITER,
    *,
    refine=True,
    grid_size=32,
):
    """Alternate best responses of provider 1 then provider 2 until both
    profits change by less than ``epsilon`` between rounds.

    Starts from the all-zero profile. Never raises on non-convergence; the
    result carries ``converged=False`` and a message instead. With ``refine``
    the converged profile is polished by a joint Newton solve of both
    providers' first-order conditions.
    """
    epsilon = check_real(epsilon, "epsilon", low=0.0, strict_low=True)
    max_iter = check_int(max_iter, "max_iter", low=1)
    game = Duopoly.from_market(cfg, policy)

    own = [(0.0, 0.0, 0.0), (0.0, 0.0, 0.0)]
    prev = (payoff(game, own[0], own[1]), payoff(game, own[1], own[0]))
    trace = [TraceRecord(_profile(*own), prev)]
    kinds, lams = ["", ""], [0.0, 0.0]
    converged = False
    message = f"no convergence within {max_iter} iterations"
    t = 0
    try:
        for t in range(1, max_iter + 1):
            for j in (0, 1):
                br = best_response(game, j, own[1 - j], start=own[j] if t > 1 else None,
                                   grid_size=grid_size)
                own[j] = br.strategy
                kinds[j], lams[j] = br.kind, br.lam
            objs = (payoff(game, own[0], own[1]), payoff(game, own[1], own[0]))
            trace.append(TraceRecord(_profile(*own), objs))
            if abs(objs[0] - prev[0]) < epsilon and abs(objs[1] - prev[1]) < epsilon:
                converged = True
                message = f"converged after {t} iterations"
                break
            prev = objs
    except NonconvergenceError as exc:
        message = f"best response failed at iteration {t}: {exc}"
        return EquilibriumResult(trace[-1].profile, trace[-1].objectives, t, False,
                                 tuple(trace), False, message)

    final = tuple(own)
    refined = False
    if converged and refine:
        better = refine_equilibrium(game, final, kinds, lams)
        if better is not None:
            final, refined = better, True
    objectives = (payoff(game, final[0], final[1]), payoff(game, final[1], final[0]))
    return EquilibriumResult(_profile(*final), objectives, t, converged, tuple(trace),
                             refined, message)


@dataclass(frozen=True)
class ParameterRanges:
    """Inclusive integer ranges for random instances. The second grant is
    ``total_subsidy - xi1``."""

    xi1: tuple = (50, 950)
    beta: tuple = (30, 200)
    n1: tuple = (20, 1000)
    n2: tuple = (20, 1000)
    total_subsidy: float = 1000.0
    gamma: float = 0.05

    def __post_init__(self):
        for name in ("xi1", "beta", "n1", "n2"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"empty range [{lo}, {hi}]", field=name)
        if self.xi1[0] < 0 or self.xi1[1] > self.total_subsidy:
            raise ConfigError("xi1 range must lie within [0, total_subsidy]", field="xi1")
        if self.beta[0] <= 0 or min(self.n1[0], self.n2[0]) < 1:
            raise ConfigError("beta must be positive and populations at least 1")

    def draw(self, rng):
        xi1 = int(rng.integers(self.xi1[0], self.xi1[1] + 1))
        beta = int(rng.integers(self.beta[0], self.beta[1] + 1))
        n1 = int(rng.integers(self.n1[0], self.n1[1] + 1))
        n2 = int(rng.integers(self.n2[0], self.n2[1] + 1))
        return xi1, beta, n1, n2


BUCKETS = ("<=15", "16-99", ">=100", "nonconverged")


def bucket_of(iterations, converged):
    if not converged:
        return "nonconverged"
    if iterations <= 15:
        return "<=15"
    if iterations < 100:
        return "16-99"
    return ">=100"


@dataclass(frozen=True)
class RunRecord:
    xi1: int
    xi2: float
    beta: int
    n1: int
    n2: int
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MonteCarloReport:
    run_count: int
    buckets: dict
    seed: int
    records: tuple = ()

    def fraction(self, bucket):
        return self.buckets[bucket] / self.run_count


def run_seed(seed, index):
    """Generator for run ``index``; depends only on ``(seed, index)``."""
    return np.random.default_rng([seed, index])


def _one_run(args):
    index, seed, ranges, epsilon, max_iter = args
    xi1, beta, n1, n2 = ranges.draw(run_seed(seed, index))
    xi2 = ranges.total_subsidy - xi1
    cfg = MarketConfig(populations=(n1, n2), beta=beta, gamma=ranges.gamma,
                       total_subsidy=ranges.total_subsidy)
    result = solve_equilibrium(cfg, GovernmentPolicy((xi1, xi2)), epsilon, max_iter, refine=False)
    return RunRecord(xi1, xi2, beta, n1, n2, result.iterations, result.converged)


def monte_carlo(runs, seed, ranges=None, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER,
                n_jobs=1):
    """Iteration-count statistics of :func:`solve_equilibrium` over random markets.

    Each run draws its parameters from a generator seeded by ``(seed, run)``,
    so the report is the same for any ``n_jobs``.
    """
    runs = check_int(runs, "runs", low=1)
    seed = check_int(seed, "seed", low=0)
    ranges = ParameterRanges() if ranges is None else ranges
    jobs = [(i, seed, ranges, epsilon, max_iter) for i in range(runs)]
    if n_jobs is not None and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_one_run, jobs, chunksize=max(1, runs // (8 * n_jobs))))
    else:
        records = [_one_run(job) for job in jobs]
    buckets = dict.fromkeys(BUCKETS, 0)
    for rec in records:
        buckets[bucket_of(rec.iterations, rec.converged)] += 1
    return MonteCarloReport(runs, buckets, seed, tuple(records))
