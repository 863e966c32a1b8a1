"""Market primitives: configuration, strategies and the payoff functions.

Providers and regions are indexed from 0. ``spend[j, k]`` is the money provider
``j`` invests in region ``k``; the service intensity a customer in region ``k``
receives from provider ``j`` is that spend (linear quality function), and the
customer's per-call utility of intensity ``psi`` is ``gamma * sqrt(psi)``.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from ._validation import (
    check_index,
    check_int,
    check_real,
    check_sequence,
    check_spend_matrix,
)
from .exceptions import BudgetViolationError, ConfigError

# Relative slack allowed on budget constraints to absorb floating-point rounding.
BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class MarketConfig:
    """Exogenous parameters of the market.

    Parameters
    ----------
    populations : sequence of int
        Customers per region (``n_k``); its length fixes the number of regions.
    beta : float
        Calls each customer makes in its home region.
    gamma : float
        Scale of the square-root utility, meant to be much smaller than one.
    alpha : float
        Calls each customer makes outside its home region.
    total_subsidy : float
        Government subsidy budget ``xi``.
    provider_count : int
        Number of providers ``J``.
    initial_cash : sequence of float, optional
        Cash on hand per provider before subsidy. Defaults to zeros.
    """

    populations: tuple
    beta: float
    gamma: float = 0.05
    alpha: float = 1.0
    total_subsidy: float = 1000.0
    provider_count: int = 2
    initial_cash: tuple = None

    def __post_init__(self):
        pops = check_sequence(self.populations, "n", kind=int, low=1)
        if not pops:
            raise ConfigError("at least one region is required", field="n")
        set_ = object.__setattr__
        set_(self, "populations", pops)
        set_(self, "beta", check_real(self.beta, "beta", low=0.0, strict_low=True))
        set_(self, "gamma", check_real(self.gamma, "gamma", low=0.0))
        set_(self, "alpha", check_real(self.alpha, "alpha", low=0.0))
        set_(self, "total_subsidy", check_real(self.total_subsidy, "xi", low=0.0))
        J = check_int(self.provider_count, "J", low=1)
        set_(self, "provider_count", J)
        cash = (0.0,) * J if self.initial_cash is None else self.initial_cash
        set_(self, "initial_cash", check_sequence(cash, "E", length=J, low=0.0))

    @property
    def region_count(self):
        return len(self.populations)

    @property
    def total_customers(self):
        return sum(self.populations)

    @property
    def fee_scale(self):
        """``gamma * beta``: the home-call utility of one unit of sqrt-intensity."""
        return self.gamma * self.beta

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class GovernmentPolicy:
    """Subsidy grants plus the rule that turns outside calls into kept subsidy.

    With ``penalty=None`` the provider keeps ``delta * OC_j`` (uncapped linear
    reward). ``delta`` is ``reward_rate`` when given, otherwise derived from the
    market as ``xi / (alpha * I)``. With a ``penalty`` callable the provider
    keeps ``(1 - penalty(OC_j)) * grant_j``; only the general objective uses it.
    """

    grants: tuple
    reward_rate: float = None
    penalty: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "grants", check_sequence(self.grants, "xi_split", low=0.0))
        if self.reward_rate is not None:
            object.__setattr__(
                self,
                "reward_rate",
                check_real(self.reward_rate, "delta", low=0.0, strict_low=True),
            )
        if self.penalty is not None and not callable(self.penalty):
            raise ConfigError("penalty must be callable", field="penalty")

    @classmethod
    def even_split(cls, cfg):
        J = cfg.provider_count
        return cls(grants=(cfg.total_subsidy / J,) * J)

    def delta(self, cfg):
        """Per-outside-call reward."""
        if self.reward_rate is not None:
            return self.reward_rate
        calls = cfg.alpha * cfg.total_customers
        return math.inf if calls == 0 else cfg.total_subsidy / calls

    def reward_coefficient(self, cfg):
        """``delta * alpha``, i.e. ``xi / I`` in linear mode: the reward per unit of
        alpha-free outside-call weight. Computing it without alpha keeps the
        provider objective exactly independent of alpha."""
        if self.reward_rate is not None:
            return self.reward_rate * cfg.alpha
        return cfg.total_subsidy / cfg.total_customers

    def validate(self, cfg):
        if len(self.grants) != cfg.provider_count:
            raise ConfigError(
                f"expected {cfg.provider_count} grants, got {len(self.grants)}",
                field="xi_split",
            )
        total = sum(self.grants)
        if total > cfg.total_subsidy * (1 + BUDGET_RTOL) + BUDGET_RTOL:
            raise ConfigError(
                f"grants sum to {total:.6g}, above the budget {cfg.total_subsidy:.6g}",
                field="xi_split",
            )
        return self


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Every provider's regional spend (J x K) and fee (J)."""

    spend: np.ndarray
    fees: np.ndarray

    def __post_init__(self):
        spend = np.array(self.spend, dtype=float)
        if spend.ndim != 2:
            raise ConfigError("spend must be a J x K matrix", field="spend")
        spend = check_spend_matrix(spend, *spend.shape)
        fees = np.array(self.fees, dtype=float).reshape(-1)
        if fees.shape != (spend.shape[0],):
            raise ConfigError(
                f"expected {spend.shape[0]} fees, got {fees.shape[0]}", field="f"
            )
        if not np.all(np.isfinite(fees)) or np.any(fees < 0):
            raise ConfigError("fees must be finite and >= 0", field="f")
        spend.setflags(write=False)
        fees.setflags(write=False)
        object.__setattr__(self, "spend", spend)
        object.__setattr__(self, "fees", fees)

    @classmethod
    def zeros(cls, providers=2, regions=2):
        return cls(np.zeros((providers, regions)), np.zeros(providers))

    @classmethod
    def from_flat(cls, s11, s12, s21, s22, f1, f2):
        """Build a two-provider, two-region profile from its six numbers."""
        return cls([[s11, s12], [s21, s22]], [f1, f2])

    def flat(self):
        """``(s11, s12, s21, s22, f1, f2)`` for a 2x2 profile."""
        (s11, s12), (s21, s22) = self.spend
        return (float(s11), float(s12), float(s21), float(s22),
                float(self.fees[0]), float(self.fees[1]))

    @property
    def provider_count(self):
        return self.spend.shape[0]

    @property
    def region_count(self):
        return self.spend.shape[1]

    def with_provider(self, j, spend_row, fee):
        spend = self.spend.copy()
        spend[j] = spend_row
        fees = self.fees.copy()
        fees[j] = fee
        return StrategyProfile(spend, fees)

    def budget_slack(self, cfg, policy):
        """``E_j + xi_j - sum_k s_jk`` per provider."""
        budgets = np.add(cfg.initial_cash, policy.grants)
        return budgets - self.spend.sum(axis=1)

    def feasible(self, cfg, policy):
        budgets = np.add(cfg.initial_cash, policy.grants)
        return tuple(bool(x) for x in self.budget_slack(cfg, policy) >= -BUDGET_RTOL * np.maximum(budgets, 1.0))

    def __eq__(self, other):
        if not isinstance(other, StrategyProfile):
            return NotImplemented
        return np.array_equal(self.spend, other.spend) and np.array_equal(self.fees, other.fees)

    __hash__ = None


@dataclass(frozen=True)
class TraceRecord:
    profile: StrategyProfile
    objectives: tuple


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of the best-response iteration.

    ``trace[0]`` is the all-zero starting state; ``trace[t]`` the state after
    round ``t``. ``profile`` is the final state, refined by a joint solve of both
    providers' first-order conditions when ``refined`` is true.
    """

    profile: StrategyProfile
    objectives: tuple
    iterations: int
    converged: bool
    trace: tuple
    refined: bool = False
    message: str = ""

    def trace_rows(self):
        """Flat rows ``(iter, s11, s12, s21, s22, f1, f2, obj1, obj2)`` for 2x2 traces."""
        return [(t, *rec.profile.flat(), *rec.objectives) for t, rec in enumerate(self.trace)]


@dataclass(frozen=True)
class ClosedFormSolution:
    s_star: np.ndarray
    f_star: tuple
    A: float
    B: float
    C: float
    D: float
    s1_star: float
    s2_star: float
    fee_clamped: tuple = (False, False)


def check_profile(profile, cfg):
    if not isinstance(profile, StrategyProfile):
        raise ConfigError(f"expected a StrategyProfile, got {type(profile).__name__}")
    if profile.spend.shape != (cfg.provider_count, cfg.region_count):
        raise ConfigError(
            f"profile is {profile.spend.shape[0]}x{profile.spend.shape[1]} but the market "
            f"has J={cfg.provider_count}, K={cfg.region_count}",
            field="spend",
        )
    return profile


def check_budget(j, profile, policy, cfg):
    budget = cfg.initial_cash[j] + policy.grants[j]
    spent = float(profile.spend[j].sum())
    if spent > budget + BUDGET_RTOL * max(budget, 1.0):
        raise BudgetViolationError(j, spent, budget)


def signal_utility(psi, cfg):
    """Per-call utility ``gamma * sqrt(psi)`` of service intensity ``psi``."""
    return cfg.gamma * np.sqrt(psi)


def customer_utility(psi, fee, cfg):
    """Home-region utility of subscribing to a provider offering ``psi`` at ``fee``.

    The result may be negative; clamping happens in :func:`choice_probabilities`.
    """
    return cfg.beta * cfg.gamma * math.sqrt(psi) - fee


def contest_shares(values):
    """Proportional shares of nonnegative parts along the last axis.

    Where every clamped value is zero the shares fall back to uniform.
    """
    v = np.maximum(np.asarray(values, dtype=float), 0.0)
    total = v.sum(axis=-1, keepdims=True)
    J = v.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = np.where(total > 0, v / np.where(total > 0, total, 1.0), 1.0 / J)
    return shares


def _utilities(profile, cfg):
    """K x J matrix of customer utilities U_j(k)."""
    psi = profile.spend.T
    return cfg.beta * signal_utility(psi, cfg) - profile.fees[None, :]


def choice_probabilities(k, profile, cfg):
    """Probability that a customer in region ``k`` subscribes to each provider."""
    check_profile(profile, cfg)
    k = check_index(k, cfg.region_count, "k")
    return contest_shares(_utilities(profile, cfg)[k])


def outside_call_flows(cfg):
    """K x K matrix whose entry ``(h, k)`` counts calls region-``h`` customers make in ``k``."""
    K = cfg.region_count
    n = np.asarray(cfg.populations, dtype=float)
    flows = np.zeros((K, K))
    if K == 1 or cfg.alpha == 0:
        return flows
    for h in range(K):
        rest = n.sum() - n[h]
        if rest <= 0:
            raise ConfigError(f"region {h} has no other populated region", field="n")
        flows[h] = cfg.alpha * n[h] * n / rest
        flows[h, h] = 0.0
    return flows


def flow_weights(cfg):
    """Per-region inflow of outside calls divided by alpha.

    ``sum_{h != k} n_h n_k / sum_{k' != h} n_k'`` for each region ``k``.
    """
    K = cfg.region_count
    n = np.asarray(cfg.populations, dtype=float)
    if K == 1:
        return np.zeros(1)
    rest = n.sum() - n
    w = np.outer(n, n) / rest[:, None]
    np.fill_diagonal(w, 0.0)
    return w.sum(axis=0)


def _intensity_shares(psi, cfg):
    """K x J shares of outside calls, in proportion to ``u(psi)``."""
    return contest_shares(signal_utility(psi, cfg) if cfg.gamma > 0 else np.sqrt(psi))


def outside_calls_served(j, profile, cfg):
    """Number of outside calls provider ``j`` serves."""
    check_profile(profile, cfg)
    j = check_index(j, cfg.provider_count, "j")
    if cfg.alpha == 0 or cfg.region_count == 1:
        return 0.0
    inflow = outside_call_flows(cfg).sum(axis=0)
    shares = _intensity_shares(profile.spend.T, cfg)
    return float(inflow @ shares[:, j])


def provider_objective(j, profile, policy, cfg, *, check_feasible=True):
    """Profit of provider ``j`` under the linear reward: fees collected plus
    reward for outside calls minus money spent.

    The reward term is written through alpha-free flow weights so the value is
    the same for every alpha.
    """
    check_profile(profile, cfg)
    j = check_index(j, cfg.provider_count, "j")
    policy.validate(cfg)
    if check_feasible:
        check_budget(j, profile, policy, cfg)
    n = np.asarray(cfg.populations, dtype=float)
    P = contest_shares(_utilities(profile, cfg))[:, j]
    revenue = profile.fees[j] * float(n @ P)
    shares = _intensity_shares(profile.spend.T, cfg)[:, j]
    reward = policy.reward_coefficient(cfg) * float(flow_weights(cfg) @ shares)
    return revenue + reward - float(profile.spend[j].sum())


def linear_penalty(delta, grant):
    """Penalty that falls linearly from 1 at zero outside calls to 0 at ``grant / delta``."""
    if grant <= 0:
        return lambda oc: 1.0
    threshold = grant / delta

    def penalty(oc):
        return max(0.0, 1.0 - oc / threshold)

    return penalty


def general_provider_objective(
    j,
    profile,
    policy,
    cfg,
    *,
    intensity=None,
    bandwidth=None,
    bandwidth_grants=None,
):
    """Profit of provider ``j`` with a general intensity function and penalty.

    ``intensity(s, b)`` maps spend and bandwidth to service intensity
    (``intensity(s, None)`` when no bandwidth is supplied); it defaults to the
    spend itself. When ``policy.penalty`` is set the provider keeps
    ``(1 - penalty(OC_j)) * grant_j``, otherwise the uncapped reward
    ``delta * OC_j``. This is an evaluator only: bandwidth is never optimised.
    """
    check_profile(profile, cfg)
    j = check_index(j, cfg.provider_count, "j")
    policy.validate(cfg)
    check_budget(j, profile, policy, cfg)
    J, K = cfg.provider_count, cfg.region_count

    if bandwidth is not None:
        b = np.asarray(bandwidth, dtype=float)
        if b.shape != (J, K) or np.any(b < 0):
            raise ConfigError(f"bandwidth must be a nonnegative {J}x{K} matrix", field="b")
        if bandwidth_grants is None:
            raise ConfigError("bandwidth supplied without bandwidth grants", field="B")
        grants = check_sequence(bandwidth_grants, "B", length=J, low=0.0)
        for row, (used, grant) in enumerate(zip(b.sum(axis=1), grants)):
            if abs(used - grant) > 1e-9 * max(1.0, grant):
                raise ConfigError(
                    f"provider {row} uses bandwidth {used:.6g} but was granted {grant:.6g}",
                    field="b",
                )
    else:
        b = None

    if intensity is None:
        psi = profile.spend.T.copy()
    else:
        psi = np.empty((K, J))
        for jj in range(J):
            for k in range(K):
                psi[k, jj] = intensity(profile.spend[jj, k], None if b is None else b[jj, k])
    if not np.all(np.isfinite(psi)) or np.any(psi < 0):
        raise ConfigError("intensity function returned a negative or non-finite value")

    n = np.asarray(cfg.populations, dtype=float)
    U = cfg.beta * signal_utility(psi, cfg) - profile.fees[None, :]
    revenue = profile.fees[j] * float(n @ contest_shares(U)[:, j])

    if cfg.alpha == 0 or K == 1:
        oc = 0.0
    else:
        oc = float(outside_call_flows(cfg).sum(axis=0) @ _intensity_shares(psi, cfg)[:, j])

    if policy.penalty is not None:
        p = float(policy.penalty(oc))
        if not (0.0 <= p <= 1.0):
            raise ConfigError(f"penalty returned {p!r}, outside [0, 1]", field="penalty")
        kept = (1.0 - p) * policy.grants[j]
    else:
        kept = 0.0 if oc == 0 else policy.delta(cfg) * oc
    return revenue + kept - float(profile.spend[j].sum())


def social_welfare(profile, cfg):
    """Customers' total expected utility from home calls and outside calls.

    Home calls use the expected assignment over the subscription probabilities.
    The outside-call term weights each provider's utility by its intensity share,
    so the utility appears twice, exactly as in the government objective.
    """
    check_profile(profile, cfg)
    n = np.asarray(cfg.populations, dtype=float)
    psi = profile.spend.T
    u = signal_utility(psi, cfg)
    P = contest_shares(cfg.beta * u - profile.fees[None, :])
    home = float(n @ (P * cfg.beta * u).sum(axis=1))
    inflow = outside_call_flows(cfg).sum(axis=0)
    outside = float(inflow @ (contest_shares(u) * u).sum(axis=1))
    return home + outside
