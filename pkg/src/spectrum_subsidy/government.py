"""The regulator's move: pick the grant split that maximizes social welfare."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_real, check_two_by_two
from .dynamics import DEFAULT_EPSILON, DEFAULT_MAX_ITER, solve_equilibrium
from .exceptions import ConfigError, SweepFailureError
from .model import GovernmentPolicy, social_welfare


@dataclass(frozen=True)
class SweepResult:
    """Grid sweep output. ``welfare[i]`` and ``equilibria[i]`` are None where the
    providers' iteration did not converge."""

    grid: tuple
    welfare: tuple
    equilibria: tuple
    argmax_index: int
    xi_star: tuple

    @property
    def converged_mask(self):
        return np.array([w is not None for w in self.welfare])

    @property
    def max_welfare(self):
        return self.welfare[self.argmax_index]


def split_grid(total, grid_size, xi_lo=50.0):
    """Uniform ``(xi1, total - xi1)`` points with ``xi1`` in ``[xi_lo, total - xi_lo]``."""
    grid_size = check_int(grid_size, "grid_size", low=2)
    xi_lo = check_real(xi_lo, "xi_lo", low=0.0)
    if 2 * xi_lo > total:
        raise ConfigError(f"xi_lo={xi_lo} leaves an empty grid for total {total}", field="xi_lo")
    return tuple((float(x), float(total - x)) for x in np.linspace(xi_lo, total - xi_lo, grid_size))


def sweep(cfg, grid_size=19, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER, *, xi_lo=50.0):
    """Solve the providers' equilibrium at each grant split and keep the best.

    Ties go to the lowest grid index.
    """
    check_two_by_two(cfg)
    grid = split_grid(cfg.total_subsidy, grid_size, xi_lo)
    welfare, equilibria = [], []
    for grants in grid:
        result = solve_equilibrium(cfg, GovernmentPolicy(grants), epsilon, max_iter)
        if result.converged:
            equilibria.append(result)
            welfare.append(float(social_welfare(result.profile, cfg)))
        else:
            equilibria.append(None)
            welfare.append(None)
    scored = [(w, i) for i, w in enumerate(welfare) if w is not None]
    if not scored:
        raise SweepFailureError(f"no grid point converged out of {len(grid)}")
    best = max(scored, key=lambda wi: (wi[0], -wi[1]))[1]
    return SweepResult(grid, tuple(welfare), tuple(equilibria), best, grid[best])
