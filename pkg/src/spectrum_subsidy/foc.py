"""First-order conditions and best responses for two providers in two regions.

A provider's strategy is ``(s1, s2, f)``: spend in region 1, spend in region 2
and fee. The functions here take the acting provider's strategy as ``own`` and
the rival's as ``opp``; regions are never swapped, so the same formulas serve
both providers.

Best responses are searched over the participation domain, where the provider
offers nonnegative utility in both regions (``f <= gamma*beta*sqrt(s_k)``). On
that domain the clamped choice rule agrees with the unclamped ratio that the
first-order conditions differentiate.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize

from ._validation import check_two_by_two
from .exceptions import NonconvergenceError, SingularDomainError
from .model import check_budget, StrategyProfile

TOL_FOC = 1e-8
# Spends are kept at or above this fraction of the total subsidy during a search.
SPEND_FLOOR = 1e-9
# Objective slack when comparing a polished root against the coarse grid.
_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class FocResidual:
    """Residuals of one provider's stationarity conditions.

    ``r_f`` is the derivative of profit in the fee, ``r_s1``/``r_s2`` the
    derivatives in the two spends minus one minus the multiplier, and
    ``complementarity`` the violation of the budget complementarity condition.
    """

    r_f: float
    r_s1: float
    r_s2: float
    complementarity: float
    lam: float

    def max_abs(self):
        return max(abs(self.r_f), abs(self.r_s1), abs(self.r_s2), abs(self.complementarity))

    def ok(self, tol=TOL_FOC):
        return self.max_abs() <= tol


@dataclass(frozen=True)
class BestResponse:
    """A provider's optimised strategy.

    ``kind`` records how it was obtained: ``"budget"`` (stationary point with the
    budget binding), ``"interior"`` (stationary point with slack budget),
    ``"boundary"`` (constrained maximiser on the participation or spend-floor
    boundary, where the stationarity conditions do not hold) or ``"cold"`` (the
    rival offers nothing, so no maximiser exists; see :func:`cold_start`).
    """

    spend: tuple
    fee: float
    lam: float
    objective: float
    kind: str
    residual: FocResidual = None

    @property
    def strategy(self):
        return (self.spend[0], self.spend[1], self.fee)


@dataclass(frozen=True)
class Duopoly:
    """Scalars of a 2x2 market needed by the hot loops."""

    n1: float
    n2: float
    total: float
    scale: float  # gamma * beta
    coef: float  # reward per unit outside-call weight, xi / I in linear mode
    budgets: tuple
    floor: float

    @classmethod
    def from_market(cls, cfg, policy):
        check_two_by_two(cfg)
        policy.validate(cfg)
        n1, n2 = (float(n) for n in cfg.populations)
        budgets = tuple(e + x for e, x in zip(cfg.initial_cash, policy.grants))
        return cls(
            n1=n1,
            n2=n2,
            total=n1 + n2,
            scale=cfg.fee_scale,
            coef=policy.reward_coefficient(cfg),
            budgets=budgets,
            floor=SPEND_FLOOR * cfg.total_subsidy,
        )


def _share(x, y):
    d = x + y
    return x / d if d > 0 else 0.5


def payoff(game, own, opp):
    """Profit of the acting provider, with clamped choice probabilities.

    Agrees with :func:`spectrum_subsidy.model.provider_objective` on 2x2 markets.
    """
    s1, s2, f = own
    o1, o2, fo = opp
    g = game.scale
    r1, r2, q1, q2 = math.sqrt(s1), math.sqrt(s2), math.sqrt(o1), math.sqrt(o2)
    P1 = _share(max(g * r1 - f, 0.0), max(g * q1 - fo, 0.0))
    P2 = _share(max(g * r2 - f, 0.0), max(g * q2 - fo, 0.0))
    reward = game.coef * (game.n2 * _share(r1, q1) + game.n1 * _share(r2, q2))
    return f * (game.n1 * P1 + game.n2 * P2) + reward - s1 - s2


def _payoff_grid(game, r1, r2, f, opp):
    """Vectorised :func:`payoff` over arrays of sqrt-spends and fees."""
    o1, o2, fo = opp
    g = game.scale
    q1, q2 = math.sqrt(o1), math.sqrt(o2)
    c1, c2 = max(g * q1 - fo, 0.0), max(g * q2 - fo, 0.0)
    U1 = np.maximum(g * r1 - f, 0.0)
    U2 = np.maximum(g * r2 - f, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        P1 = np.where(U1 + c1 > 0, U1 / (U1 + c1), 0.5)
        P2 = np.where(U2 + c2 > 0, U2 / (U2 + c2), 0.5)
        h1 = np.where(r1 + q1 > 0, r1 / (r1 + q1), 0.5)
        h2 = np.where(r2 + q2 > 0, r2 / (r2 + q2), 0.5)
    reward = game.coef * (game.n2 * h1 + game.n1 * h2)
    return f * (game.n1 * P1 + game.n2 * P2) + reward - r1**2 - r2**2


def _raw_residuals(game, own, opp):
    """``(r_f, d1, d2)`` where ``d_k`` is the spend derivative plus one (so that
    ``r_sk = d_k - 1 - lam``). Formulas exactly as derived for provider 1."""
    s1, s2, f = own
    o1, o2, fo = opp
    if min(s1, s2, o1, o2) <= 0:
        raise SingularDomainError(
            f"spends must be strictly positive, got own=({s1}, {s2}) rival=({o1}, {o2})"
        )
    g, n1, n2 = game.scale, game.n1, game.n2
    r1, r2, q1, q2 = math.sqrt(s1), math.sqrt(s2), math.sqrt(o1), math.sqrt(o2)
    a1, a2 = g * r1, g * r2
    c1, c2 = g * q1 - fo, g * q2 - fo
    D1 = a1 - f + c1
    D2 = a2 - f + c2
    r_f = (n1 * (a1 - 2 * f) * D1 + f * n1 * (a1 - f)) / D1**2 + (
        n2 * (a2 - 2 * f) * D2 + f * n2 * (a2 - f)
    ) / D2**2
    d1 = g * f * n1 * c1 / (2 * r1 * D1**2) + n2 * game.coef * q1 / (2 * (q1 + r1) ** 2 * r1)
    d2 = g * f * n2 * c2 / (2 * r2 * D2**2) + n1 * game.coef * q2 / (2 * (r2 + q2) ** 2 * r2)
    return r_f, d1 - 1.0, d2 - 1.0


def _complementarity(lam, spent, budget):
    return max(0.0, -lam, spent - budget, min(lam, budget - spent))


def residuals(game, own, opp, budget):
    """:class:`FocResidual` for ``own = (s1, s2, f, lam)`` against ``opp = (s1, s2, f)``."""
    s1, s2, f, lam = own
    r_f, e1, e2 = _raw_residuals(game, (s1, s2, f), opp)
    return FocResidual(
        r_f=r_f,
        r_s1=e1 - lam,
        r_s2=e2 - lam,
        complementarity=_complementarity(lam, s1 + s2, budget),
        lam=lam,
    )


def residuals_provider1(own, opp, policy, cfg):
    """Stationarity residuals of provider 1 (fee, spend in region 1, spend in
    region 2) and its budget complementarity gap.

    ``own = (s11, s12, f1, lam1)``, ``opp = (s21, s22, f2)``.
    """
    game = Duopoly.from_market(cfg, policy)
    return residuals(game, own, opp, game.budgets[0])


def residuals_provider2(own, opp, policy, cfg):
    """Mirror of :func:`residuals_provider1` for provider 2.

    ``own = (s21, s22, f2, lam2)``, ``opp = (s11, s12, f1)``.
    """
    game = Duopoly.from_market(cfg, policy)
    return residuals(game, own, opp, game.budgets[1])


def profile_residuals(profile, policy, cfg, lams=None):
    """Residuals of both providers at a 2x2 profile.

    Multipliers default to the value implied by the spend conditions when the
    budget binds (their mean) and to zero otherwise.
    """
    game = Duopoly.from_market(cfg, policy)
    s11, s12, s21, s22, f1, f2 = profile.flat()
    out = []
    for j, (own, opp) in enumerate((((s11, s12, f1), (s21, s22, f2)),
                                    ((s21, s22, f2), (s11, s12, f1)))):
        if lams is None:
            _, e1, e2 = _raw_residuals(game, own, opp)
            binding = abs(own[0] + own[1] - game.budgets[j]) <= 1e-9 * max(1.0, game.budgets[j])
            lam = max(0.0, 0.5 * (e1 + e2)) if binding else 0.0
        else:
            lam = lams[j]
        out.append(residuals(game, (*own, lam), opp, game.budgets[j]))
    return tuple(out)


def newton(fun, x0, *, tol=1e-12, max_iter=60, steps=None):
    """Damped Newton iteration with a forward-difference Jacobian.

    ``fun`` returns a sequence of residuals, or ``None`` outside its domain.
    Returns ``(x, max_abs_residual, converged)``.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    F = fun(x)
    if F is None:
        return x, math.inf, False
    F = np.asarray(F, dtype=float)
    norm = float(np.max(np.abs(F)))
    for _ in range(max_iter):
        if not math.isfinite(norm):
            return x, math.inf, False
        if norm <= tol:
            return x, norm, True
        jac = np.empty((n, n))
        for i in range(n):
            h = (steps[i] if steps is not None else 1e-7) * max(1.0, abs(x[i]))
            xh = x.copy()
            xh[i] += h
            Fh = fun(xh)
            if Fh is None:
                xh[i] = x[i] - h
                Fh = fun(xh)
                if Fh is None:
                    return x, norm, False
                h = -h
            jac[:, i] = (np.asarray(Fh, dtype=float) - F) / h
        try:
            dx = np.linalg.solve(jac, -F)
        except np.linalg.LinAlgError:
            return x, norm, False
        t = 1.0
        while t > 1e-10:
            x_new = x + t * dx
            F_new = fun(x_new)
            if F_new is not None:
                F_new = np.asarray(F_new, dtype=float)
                norm_new = float(np.max(np.abs(F_new)))
                if math.isfinite(norm_new) and norm_new < (1 - 1e-4 * t) * norm:
                    break
            t *= 0.5
        else:
            return x, norm, norm <= tol
        x, F, norm = x_new, F_new, norm_new
    return x, norm, norm <= tol


def _fee_cap(game, s1, s2):
    return game.scale * math.sqrt(min(s1, s2))


def _solve_budget_face(game, opp, budget, start):
    """Stationary point with the budget binding, as ``(s1, s2, f, lam)`` or None."""
    lo = game.floor / budget

    def fun(z):
        t, f = z
        if not (lo <= t <= 1 - lo):
            return None
        try:
            r_f, e1, e2 = _raw_residuals(game, (t * budget, (1 - t) * budget, f), opp)
        except (SingularDomainError, ZeroDivisionError):
            return None
        return (r_f / game.total, e1 - e2)

    t0 = start[0] / (start[0] + start[1])
    z, _, ok = newton(fun, (min(max(t0, 2 * lo), 1 - 2 * lo), start[2]), steps=(1e-8, 1e-7))
    if not ok:
        return None
    t, f = z
    s1, s2 = t * budget, (1 - t) * budget
    _, e1, e2 = _raw_residuals(game, (s1, s2, f), opp)
    return s1, s2, f, 0.5 * (e1 + e2)


def _solve_interior(game, opp, start):
    """Stationary point with a slack budget (multiplier zero), or None."""

    def fun(z):
        s1, s2, f = z
        if s1 <= game.floor or s2 <= game.floor:
            return None
        try:
            r_f, e1, e2 = _raw_residuals(game, (s1, s2, f), opp)
        except ZeroDivisionError:
            return None
        return (r_f / game.total, e1, e2)

    z, _, ok = newton(fun, start, steps=(1e-7, 1e-7, 1e-7))
    if not ok:
        return None
    return float(z[0]), float(z[1]), float(z[2]), 0.0


def _stationary_candidate(game, opp, budget, start):
    """Polish ``start`` into a stationary point that satisfies the budget
    complementarity condition, or return None."""
    sol = _solve_budget_face(game, opp, budget, start)
    if sol is not None and sol[3] < 0:
        sol = _solve_interior(game, opp, sol[:3])
        if sol is not None and sol[0] + sol[1] > budget * (1 + 1e-12):
            sol = None
    if sol is None:
        return None
    s1, s2, f, lam = (float(v) for v in sol)
    if f < 0 or f > _fee_cap(game, s1, s2) or min(s1, s2) < game.floor:
        return None
    res = residuals(game, (s1, s2, f, lam), opp, budget)
    if not res.ok():
        return None
    kind = "budget" if lam > 0 or s1 + s2 >= budget * (1 - 1e-12) else "interior"
    return BestResponse((s1, s2), f, lam, payoff(game, (s1, s2, f), opp), kind, res)


def _grid_best(game, opp, budget, size):
    theta = np.linspace(0.0, 1.0, size + 2)[1:-1, None]
    frac = np.linspace(0.0, 1.0, size + 1)[None, :]
    r1 = np.sqrt(theta * budget)
    r2 = np.sqrt((1.0 - theta) * budget)
    fees = frac * game.scale * np.minimum(r1, r2)
    values = _payoff_grid(game, r1, r2, fees, opp)
    i, k = np.unravel_index(np.argmax(values), values.shape)
    s1 = float(theta[i, 0] * budget)
    return (s1, budget - s1, float(fees[i, k])), float(values[i, k])


def _constrained_search(game, opp, budget, start):
    """Local maximiser of the clamped profit over the participation domain.

    The domain is mapped onto a box: budget share ``theta`` of region 1, spent
    fraction ``T`` of the budget and fee fraction ``phi`` of the participation
    cap. The cap is then the plain bound ``phi = 1``, which L-BFGS-B handles
    exactly, whereas a general constrained solver stalls on the kink beyond it.
    """
    fl = game.floor
    lo = fl / budget
    s1, s2, f = start
    cap0 = _fee_cap(game, s1, s2)
    z0 = (s1 / (s1 + s2), min(1.0, (s1 + s2) / budget), f / cap0 if cap0 > 0 else 0.0)
    scale = max(1.0, abs(payoff(game, start, opp)))

    def point(z):
        theta, T, phi = z
        spent = T * budget
        a, b = max(theta * spent, fl), max((1.0 - theta) * spent, fl)
        return a, b, phi * _fee_cap(game, a, b)

    res = minimize(
        lambda z: -payoff(game, point(z), opp) / scale,
        np.clip(z0, [lo, 2 * lo, 0.0], [1 - lo, 1.0, 1.0]),
        method="L-BFGS-B",
        bounds=((lo, 1 - lo), (2 * lo, 1.0), (0.0, 1.0)),
        options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 500},
    )
    best = point(res.x)
    return best if payoff(game, best, opp) >= payoff(game, start, opp) else start


def _boundary_response(game, opp, budget, point):
    s1, s2, f = point
    binding = s1 + s2 >= budget * (1 - 1e-9)
    try:
        _, e1, e2 = _raw_residuals(game, point, opp)
        lam = max(0.0, 0.5 * (e1 + e2)) if binding else 0.0
        res = residuals(game, (s1, s2, f, lam), opp, budget)
    except (SingularDomainError, ZeroDivisionError):
        lam, res = 0.0, None
    return BestResponse((s1, s2), f, lam, payoff(game, point, opp), "boundary", res)


def cold_start(game, budget):
    """Response to a rival that offers no customer positive utility anywhere.

    Profit then approaches, but never reaches, its supremum as the fee rises to
    the participation cap, so there is no maximiser. The spend is the limit
    optimum (even split of ``min(budget, (gamma*beta*I)**2 / 8)``) and the fee is
    half the cap, leaving customers strictly positive utility.
    """
    spent = min(budget, (game.scale * game.total) ** 2 / 8.0)
    s = spent / 2.0
    return (s, s, 0.5 * game.scale * math.sqrt(s))


def _pick(cands):
    return max(cands, key=lambda c: (round(c.objective, 9), c.fee))


def best_response(game, j, opp, start=None, grid_size=32):
    """Core of :func:`best_response_provider` on a prepared :class:`Duopoly`."""
    budget = game.budgets[j]
    fl = game.floor
    if budget <= fl:
        point = (0.0, 0.0, 0.0)
        return BestResponse((0.0, 0.0), 0.0, 0.0, payoff(game, point, opp), "boundary", None)
    opp = (max(opp[0], fl), max(opp[1], fl), opp[2])
    g = game.scale
    c1, c2 = g * math.sqrt(opp[0]) - opp[2], g * math.sqrt(opp[1]) - opp[2]
    if max(c1, c2) <= 0:
        point = cold_start(game, budget)
        return BestResponse(point[:2], point[2], 0.0, payoff(game, point, opp), "cold", None)

    grid_point, grid_value = _grid_best(game, opp, budget, grid_size)
    target = grid_value - _GRID_RTOL * max(1.0, abs(grid_value))
    cands = []
    smooth = min(c1, c2) > 0
    if smooth:
        starts = []
        if start is not None and min(start[0], start[1]) > fl:
            starts.append(tuple(float(v) for v in start))
        starts.append(grid_point)
        for s in starts:
            cand = _stationary_candidate(game, opp, budget, s)
            if cand is not None:
                cands.append(cand)
                if cand.objective >= target:
                    break
    if not cands or _pick(cands).objective < target:
        point = _constrained_search(game, opp, budget, grid_point)
        if smooth:
            cand = _stationary_candidate(game, opp, budget, point)
            if cand is not None:
                cands.append(cand)
        bnd = _boundary_response(game, opp, budget, point)
        if not cands or bnd.objective > _pick(cands).objective + _GRID_RTOL * max(1.0, abs(bnd.objective)):
            if bnd.objective < target:
                best_res = min((c.residual.max_abs() for c in cands if c.residual), default=None)
                raise NonconvergenceError(
                    f"no best response for provider {j + 1} reached the grid optimum "
                    f"{grid_value:.6g}",
                    residual=best_res,
                )
            cands.append(bnd)
    return _pick(cands)


def best_response_provider(j, opponent, policy, cfg, start=None, grid_size=32):
    """Best response of provider ``j`` (0 or 1) to the rival strategy
    ``opponent = (s1, s2, f)``.

    Stationary points of the first-order system are found by damped Newton from
    ``start`` (warm start) and from the best point of a coarse grid on the budget
    face; the one with the highest profit wins, ties going to the larger fee. If
    no stationary point reaches the grid optimum the maximiser lies on the
    boundary of the participation domain and is located by a constrained local
    search.
    """
    game = Duopoly.from_market(cfg, policy)
    if j not in (0, 1):
        raise ValueError(f"provider index must be 0 or 1, got {j!r}")
    br = best_response(game, j, opponent, start=start, grid_size=grid_size)
    spend = np.zeros((2, 2))
    spend[j] = br.spend
    spend[1 - j] = opponent[:2]
    fees = np.zeros(2)
    fees[j], fees[1 - j] = br.fee, opponent[2]
    check_budget(j, StrategyProfile(spend, fees), policy, cfg)
    return br
