"""scikit-learn style wrappers.

Each row of ``X`` describes one market. The solvers are stateless, so ``fit``
only validates the input width; ``predict`` does the work row by row.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_array_2d, check_int, check_real
from .closed_form import closed_form_solution
from .dynamics import DEFAULT_EPSILON, DEFAULT_MAX_ITER, solve_equilibrium
from .exceptions import NonconvergenceError
from .government import sweep
from .model import GovernmentPolicy, MarketConfig

MARKET_COLUMNS = ("xi1", "xi2", "beta", "n1", "n2")
PROFILE_COLUMNS = ("s11", "s12", "s21", "s22", "f1", "f2")


class _MarketEstimator(BaseEstimator):
    n_columns = len(MARKET_COLUMNS)

    def fit(self, X, y=None):
        check_array_2d(X, self.n_columns)
        self._check_params()
        self.n_features_in_ = self.n_columns
        return self

    def _check_params(self):
        check_real(self.gamma, "gamma", low=0.0)
        check_real(self.alpha, "alpha", low=0.0)

    def _markets(self, X):
        check_is_fitted(self)
        for xi1, xi2, beta, n1, n2 in check_array_2d(X, self.n_columns):
            cfg = MarketConfig(populations=(n1, n2), beta=beta, gamma=self.gamma,
                               alpha=self.alpha, total_subsidy=xi1 + xi2)
            yield cfg, GovernmentPolicy((xi1, xi2))

    def predict(self, X):
        """Array of shape ``(n_rows, 6)`` with columns ``s11, s12, s21, s22, f1, f2``."""
        return np.array([self._solve(cfg, policy) for cfg, policy in self._markets(X)])


class EquilibriumEstimator(_MarketEstimator):
    """Best-response equilibrium of each market row ``[xi1, xi2, beta, n1, n2]``.

    Raises NonconvergenceError for a row that does not converge.
    """

    def __init__(self, gamma=0.05, alpha=1.0, epsilon=DEFAULT_EPSILON,
                 max_iter=DEFAULT_MAX_ITER):
        self.gamma = gamma
        self.alpha = alpha
        self.epsilon = epsilon
        self.max_iter = max_iter

    def _check_params(self):
        super()._check_params()
        check_real(self.epsilon, "epsilon", low=0.0, strict_low=True)
        check_int(self.max_iter, "max_iter", low=1)

    def _solve(self, cfg, policy):
        result = solve_equilibrium(cfg, policy, self.epsilon, self.max_iter)
        if not result.converged:
            raise NonconvergenceError(result.message)
        return result.profile.flat()


class ClosedFormEstimator(_MarketEstimator):
    """Closed-form spends and fees for each market row."""

    def __init__(self, gamma=0.05, alpha=1.0):
        self.gamma = gamma
        self.alpha = alpha

    def _solve(self, cfg, policy):
        cf = closed_form_solution(cfg, policy)
        return (*cf.s_star.ravel(), *cf.f_star)


class SubsidyAllocator(BaseEstimator):
    """Welfare-maximizing grant split for rows ``[xi, beta, n1, n2]``.

    ``predict`` returns ``(xi1*, xi2*)`` per row. After ``fit`` on a single row,
    ``sweep_`` and ``xi_star_`` hold that market's sweep.
    """

    def __init__(self, gamma=0.05, grid_size=19, xi_lo=50.0, epsilon=DEFAULT_EPSILON,
                 max_iter=DEFAULT_MAX_ITER):
        self.gamma = gamma
        self.grid_size = grid_size
        self.xi_lo = xi_lo
        self.epsilon = epsilon
        self.max_iter = max_iter

    def _sweep(self, row):
        xi, beta, n1, n2 = row
        cfg = MarketConfig(populations=(n1, n2), beta=beta, gamma=self.gamma, total_subsidy=xi)
        return sweep(cfg, self.grid_size, self.epsilon, self.max_iter, xi_lo=self.xi_lo)

    def fit(self, X, y=None):
        X = check_array_2d(X, 4)
        check_int(self.grid_size, "grid_size", low=2)
        self.n_features_in_ = 4
        if len(X) == 1:
            self.sweep_ = self._sweep(X[0])
            self.xi_star_ = self.sweep_.xi_star
        return self

    def predict(self, X):
        check_is_fitted(self)
        return np.array([self._sweep(row).xi_star for row in check_array_2d(X, 4)])
