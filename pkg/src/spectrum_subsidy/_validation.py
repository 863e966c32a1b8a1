"""Input validation helpers shared by the public functions and estimators."""

import math
from numbers import Integral, Real

import numpy as np

from .exceptions import ConfigError


def check_real(value, name, *, low=None, high=None, strict_low=False):
    """Return ``value`` as a finite float, raising ConfigError when out of range."""
    if isinstance(value, bool) or not isinstance(value, (Real, np.floating, np.integer)):
        raise ConfigError(f"expected a real number, got {value!r}", field=name)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"must be finite, got {value!r}", field=name)
    if low is not None:
        if strict_low and value <= low:
            raise ConfigError(f"must be > {low}, got {value!r}", field=name)
        if not strict_low and value < low:
            raise ConfigError(f"must be >= {low}, got {value!r}", field=name)
    if high is not None and value > high:
        raise ConfigError(f"must be <= {high}, got {value!r}", field=name)
    return value


def check_int(value, name, *, low=None):
    if isinstance(value, bool) or not isinstance(value, (Integral, np.integer)):
        if isinstance(value, (float, np.floating)) and float(value).is_integer():
            value = int(value)
        else:
            raise ConfigError(f"expected an integer, got {value!r}", field=name)
    value = int(value)
    if low is not None and value < low:
        raise ConfigError(f"must be >= {low}, got {value!r}", field=name)
    return value


def check_sequence(values, name, *, length=None, kind=float, low=None):
    """Validate a 1-d sequence of numbers and return it as a tuple."""
    try:
        items = list(values)
    except TypeError:
        raise ConfigError(f"expected a sequence, got {values!r}", field=name) from None
    if length is not None and len(items) != length:
        raise ConfigError(f"expected {length} entries, got {len(items)}", field=name)
    if kind is int:
        return tuple(check_int(v, f"{name}[{i}]", low=low) for i, v in enumerate(items))
    return tuple(check_real(v, f"{name}[{i}]", low=low) for i, v in enumerate(items))


def check_index(index, count, name):
    index = check_int(index, name, low=0)
    if index >= count:
        raise ConfigError(f"index {index} out of range for {count} entries", field=name)
    return index


def check_two_by_two(cfg):
    """The analytic first-order conditions only exist for two providers and two regions."""
    if cfg.provider_count != 2 or cfg.region_count != 2:
        raise ConfigError(
            "this operation needs two providers and two regions, got "
            f"J={cfg.provider_count}, K={cfg.region_count}"
        )


def check_spend_matrix(spend, providers, regions):
    arr = np.array(spend, dtype=float)
    if arr.shape != (providers, regions):
        raise ConfigError(
            f"expected a {providers}x{regions} spend matrix, got shape {arr.shape}",
            field="spend",
        )
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError("spend entries must be finite and >= 0", field="spend")
    return arr


def check_array_2d(X, n_features, name="X"):
    """sklearn-style check for estimator inputs: finite float matrix with fixed width."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n_features:
        raise ConfigError(
            f"expected an array with {n_features} columns, got shape {np.shape(X)}", field=name
        )
    if not np.all(np.isfinite(arr)):
        raise ConfigError("input contains NaN or infinity", field=name)
    return arr
