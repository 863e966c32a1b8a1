"""Tabular datasets for the standard experiment figures.

Each builder returns ``(header, rows)`` with plain floats, ready for
:mod:`csv`. Column names use the model's symbols: ``sJK`` is provider J's spend
in region K, ``fJ`` its fee and ``objJ`` its equilibrium profit. Numerical
columns come from best-response iteration; ``*_cf`` columns come from the
closed form.
"""

import numpy as np

from .closed_form import closed_form_solution, fee_branches
from .config import ExperimentConfig
from .dynamics import solve_equilibrium
from .exceptions import NonconvergenceError
from .foc import Duopoly, payoff
from .model import GovernmentPolicy, MarketConfig

TRACE_BASE = ExperimentConfig(
    MarketConfig(populations=(26, 744), beta=76, gamma=0.05), GovernmentPolicy((262, 738))
)
SWEEP_BASE = ExperimentConfig(
    MarketConfig(populations=(40, 80), beta=30, gamma=0.05), GovernmentPolicy((400, 600))
)

XI1_GRID = tuple(range(50, 1000, 50))
POPULATION_GRID = (10,) + tuple(range(50, 1001, 50))
BETA_GRID = tuple(range(30, 201, 10))

SPEND_COLS = ("s11", "s12", "s21", "s22")


def _solve(base, cfg, policy):
    result = solve_equilibrium(cfg, policy, base.epsilon, base.max_iter)
    if not result.converged:
        raise NonconvergenceError(
            f"no equilibrium for n={cfg.populations}, beta={cfg.beta}, "
            f"xi_split={policy.grants}: {result.message}"
        )
    return result


def _closed_objectives(cfg, policy, cf):
    game = Duopoly.from_market(cfg, policy)
    own = [(cf.s_star[j, 0], cf.s_star[j, 1], cf.f_star[j]) for j in (0, 1)]
    return payoff(game, own[0], own[1]), payoff(game, own[1], own[0])


def _split_sweep(base):
    total = base.market.total_subsidy
    for xi1 in XI1_GRID:
        if xi1 <= total:
            policy = GovernmentPolicy((float(xi1), total - xi1))
            yield float(xi1), policy, _solve(base, base.market, policy)


def fig2(base=TRACE_BASE):
    """Best-response trace from the all-zero start."""
    result = _solve(base, base.market, base.require_policy())
    header = ("iter",) + SPEND_COLS + ("f1", "f2", "obj1", "obj2")
    return header, [tuple(float(v) for v in row) for row in result.trace_rows()]


def fig3a(base=SWEEP_BASE):
    header = ("xi1", "xi2", "obj1", "obj2", "obj1_cf", "obj2_cf")
    rows = []
    for xi1, policy, res in _split_sweep(base):
        cf = closed_form_solution(base.market, policy)
        rows.append((xi1, policy.grants[1], *res.objectives,
                     *_closed_objectives(base.market, policy, cf)))
    return header, rows


def fig3b(base=SWEEP_BASE):
    header = ("xi1", "xi2") + SPEND_COLS + tuple(c + "_cf" for c in SPEND_COLS)
    rows = []
    for xi1, policy, res in _split_sweep(base):
        cf = closed_form_solution(base.market, policy)
        rows.append((xi1, policy.grants[1], *res.profile.spend.ravel(), *cf.s_star.ravel()))
    return header, rows


def fig4(base=SWEEP_BASE):
    """Equilibrium spends as region 1 grows, region 2 fixed."""
    policy = base.require_policy()
    n2 = base.market.populations[1]
    header = ("n1", "n2") + SPEND_COLS
    rows = []
    for n1 in POPULATION_GRID:
        cfg = base.market.replace(populations=(n1, n2))
        res = _solve(base, cfg, policy)
        rows.append((float(n1), float(n2), *res.profile.spend.ravel()))
    return header, rows


def fig5a(base=SWEEP_BASE):
    header = ("xi1", "xi2", "f1", "f2", "f1_cf", "f2_cf")
    rows = []
    for xi1, policy, res in _split_sweep(base):
        cf = closed_form_solution(base.market, policy)
        rows.append((xi1, policy.grants[1], *res.profile.fees, *cf.f_star))
    return header, rows


def _fee_rows(base, key, values, build_cfg):
    policy = base.require_policy()
    rows = []
    for v in values:
        cfg = build_cfg(v)
        res = _solve(base, cfg, policy)
        cf = closed_form_solution(cfg, policy)
        rows.append((float(v), *res.profile.fees, *cf.f_star))
    return (key, "f1", "f2", "f1_cf", "f2_cf"), rows


def fig5b(base=SWEEP_BASE):
    return _fee_rows(base, "beta", BETA_GRID, lambda b: base.market.replace(beta=b))


def fig6a(base=SWEEP_BASE):
    n2 = base.market.populations[1]
    return _fee_rows(base, "n1", POPULATION_GRID,
                     lambda n1: base.market.replace(populations=(n1, n2)))


def fig6b(base=SWEEP_BASE):
    n1 = base.market.populations[0]
    return _fee_rows(base, "n2", POPULATION_GRID,
                     lambda n2: base.market.replace(populations=(n1, n2)))


def fig10(base=SWEEP_BASE):
    """Provider 1's three closed-form fee branches against its numerical fee."""
    header = ("xi1", "f1", "f1_k0", "f1_k1", "f1_k2")
    rows = []
    for xi1, policy, res in _split_sweep(base):
        branches = fee_branches(policy.grants[0] / 2, policy.grants[1] / 2, base.market)
        rows.append((xi1, float(res.profile.fees[0]), *branches))
    return header, rows


FIGURES = {
    "fig2": fig2,
    "fig3a": fig3a,
    "fig3b": fig3b,
    "fig4": fig4,
    "fig5a": fig5a,
    "fig5b": fig5b,
    "fig6a": fig6a,
    "fig6b": fig6b,
    "fig10": fig10,
}


def default_base(figure_id):
    return TRACE_BASE if figure_id == "fig2" else SWEEP_BASE


def build_figure(figure_id, base=None):
    """Rows for ``figure_id``; every cell is a finite float."""
    header, rows = FIGURES[figure_id](default_base(figure_id) if base is None else base)
    rows = [tuple(float(v) for v in row) for row in rows]
    if not all(np.isfinite(row).all() for row in rows):
        raise NonconvergenceError(f"{figure_id}: non-finite value in dataset")
    return header, rows
