"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import InvariantError, MoonvolError


def check_option(name, value, allowed):
    if value not in allowed:
        raise MoonvolError(f"{name} must be one of {', '.join(map(str, allowed))}; got {value!r}")
    return value


def check_ohlc_array(X):
    """Coerce ``X`` to a float ``(n, 4)`` array of valid open/high/low/close rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 4:
        raise MoonvolError(f"expected 4 columns (open, high, low, close), got {X.shape[1]}")
    o, h, l, c = X.T
    bad = (
        (X <= 0).any(axis=1)
        | (h < l)
        | (l > np.minimum(o, c))
        | (h < np.maximum(o, c))
    )
    if bad.any():
        rows = np.flatnonzero(bad)[:5].tolist()
        raise InvariantError(f"invalid OHLC rows (first offending indices: {rows})")
    return X


def check_thresholds(negative, positive):
    if not negative <= 0.0 <= positive or negative == positive:
        raise MoonvolError(
            f"thresholds must satisfy negative <= 0 <= positive; got ({negative}, {positive})"
        )
    return float(negative), float(positive)


def check_vector(y, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise MoonvolError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise MoonvolError(f"{name} contains non-finite values")
    return y
