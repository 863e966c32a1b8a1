"""Closed-form approximations of the 2x2 equilibrium.

Spend splits follow a fixed blend of population share and an even split. Fees
solve the pair of fee conditions obtained when both regions are equally
populated and each provider splits its grant evenly; after a shift the
condition becomes a depressed cubic ``t**3 - A*t - B = 0`` whose three real
roots are written trigonometrically. The middle root (``k = 1``) is the one
that tracks the numerical equilibrium.
"""

from fractions import Fraction
import math

import numpy as np

from ._validation import check_real, check_two_by_two
from .exceptions import ComplexRootError
from .model import ClosedFormSolution

# arccos arguments this far outside [-1, 1] are treated as rounding spill.
_ACOS_SPILL = 1e-12


def subsidy_split(cfg, policy):
    """2x2 matrix of approximate equilibrium spends; row ``j`` sums to grant ``j``."""
    check_two_by_two(cfg)
    policy.validate(cfg)
    n1, n2 = cfg.populations
    w1 = n1 / (n1 + n2) + 0.5
    w2 = n2 / (n1 + n2) + 0.5
    return np.array([[g / 2 * w1, g / 2 * w2] for g in policy.grants])


def cubic_coefficients(s1_star, s2_star, cfg):
    """Coefficients ``(A, B, C, D)`` of the depressed cubics for both fees.

    ``A, B`` belong to provider 1 and ``C, D`` to provider 2; the second pair is
    the first with the two spends swapped.
    """
    s1 = check_real(s1_star, "s1_star", low=0.0)
    s2 = check_real(s2_star, "s2_star", low=0.0)
    g = cfg.fee_scale

    def pair(a, b):
        ra, rb = math.sqrt(a), math.sqrt(b)
        lin = 4 * g**2 * (9 * ra * rb + (ra - 2 * rb) ** 2) / 27
        const = g**3 / 27**2 * (16 * a * ra - 240 * b * ra - 123 * a * rb - 128 * b * rb)
        return lin, const

    A, B = pair(s1, s2)
    C, D = pair(s2, s1)
    return A, B, C, D


def _acos_argument(A, B):
    if not A > 0:
        raise ComplexRootError(f"need A > 0 for three real roots, got A={A!r}")
    arg = -B * math.sqrt(27.0 / (4.0 * A**3))
    if abs(arg) > 1.0:
        if abs(arg) - 1.0 > _ACOS_SPILL:
            raise ComplexRootError(
                f"27*B**2/(4*A**3) = {arg * arg:.12g} > 1: only one real root"
            )
        arg = math.copysign(1.0, arg)
    return arg


def viete_roots(A, B):
    """The three real roots of ``t**3 - A*t - B = 0`` in formula order k = 0, 1, 2.

    ``t_k = 2 sqrt(A/3) cos(arccos(-B sqrt(27/(4 A^3))) / 3 + (3 - 2k) pi / 3)``.
    For ``B <= 0`` the arccos argument equals ``sqrt(27 B^2 / (4 A^3))``.
    """
    arg = _acos_argument(A, B)
    amp = 2.0 * math.sqrt(A / 3.0)
    phase = math.acos(arg) / 3.0
    return tuple(amp * math.cos(phase + (3 - 2 * k) * math.pi / 3.0) for k in range(3))


def sorted_roots(A, B):
    return tuple(sorted(viete_roots(A, B)))


def _polished_fee(t, ra, rb, g):
    """``base - t`` after Newton steps on the cubic in exact rational arithmetic.

    Near a double root the trigonometric form loses several digits; the
    coefficients are rebuilt exactly from the same float square roots so the
    fee satisfies the fee conditions to rounding. A step that would move the
    root by more than 1e-6 relative is refused, so a branch never jumps to its
    neighbour.
    """
    ra, rb, g = Fraction(ra), Fraction(rb), Fraction(g)
    a, b = ra * ra, rb * rb
    A = 4 * g**2 * (9 * ra * rb + (ra - 2 * rb) ** 2) / 27
    B = g**3 / 729 * (16 * a * ra - 240 * b * ra - 123 * a * rb - 128 * b * rb)
    start = T = Fraction(t)
    for _ in range(3):
        slope = 3 * T * T - A
        if slope == 0:
            break
        nxt = Fraction(float(T - (T**3 - A * T - B) / slope))
        if abs(nxt - start) > 1e-6 * max(1, abs(start)):
            break
        T = nxt
    return float(g * (7 * ra + 4 * rb) / 9 - T)


def fee_branches(s1_star, s2_star, cfg):
    """All three fee candidates ``(f_k for k in 0, 1, 2)`` for provider 1 given the
    even-split spends ``s1_star`` (own) and ``s2_star`` (rival)."""
    A, B, _, _ = cubic_coefficients(s1_star, s2_star, cfg)
    ra, rb = math.sqrt(s1_star), math.sqrt(s2_star)
    return tuple(_polished_fee(t, ra, rb, cfg.fee_scale) for t in viete_roots(A, B))


def optimum_fees(cfg, policy, *, with_flags=False):
    """Closed-form fees ``(f1, f2)`` from the ``k = 1`` branch.

    Applied whatever the populations are. A negative fee is clamped to zero;
    pass ``with_flags=True`` to also get which fees were clamped.
    """
    check_two_by_two(cfg)
    policy.validate(cfg)
    s1, s2 = policy.grants[0] / 2, policy.grants[1] / 2
    f1 = fee_branches(s1, s2, cfg)[1]
    f2 = fee_branches(s2, s1, cfg)[1]
    flags = (f1 < 0, f2 < 0)
    fees = (max(f1, 0.0), max(f2, 0.0))
    return (fees, flags) if with_flags else fees


def reduced_fee_residuals(f1, f2, s1_star, s2_star, cfg):
    """Fee conditions under equal populations and even splits.

    With ``x = g sqrt(s1) - f1`` and ``y = g sqrt(s2) - f2`` these are
    ``x**2 + y (2x - g sqrt(s1))`` and ``y**2 + x (2y - g sqrt(s2))``.
    """
    g = cfg.fee_scale
    a1, a2 = g * math.sqrt(s1_star), g * math.sqrt(s2_star)
    x, y = a1 - f1, a2 - f2
    return x * x + y * (2 * x - a1), y * y + x * (2 * y - a2)


def closed_form_solution(cfg, policy):
    """Everything the closed form produces, including the cubic coefficients."""
    s_star = subsidy_split(cfg, policy)
    s1, s2 = policy.grants[0] / 2, policy.grants[1] / 2
    A, B, C, D = cubic_coefficients(s1, s2, cfg)
    fees, flags = optimum_fees(cfg, policy, with_flags=True)
    return ClosedFormSolution(s_star, fees, A, B, C, D, s1, s2, flags)
