"""Range-based daily variance estimators and the log-volatility proxy.

Scalar functions operate on one :class:`LogRanges`; :class:`RangeVolatility`
applies the same formulas column-wise to an ``(n, 4)`` OHLC array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DegenerateBarError
from .market_data import OhlcBar
from .validation import check_ohlc_array, check_option

LN2 = math.log(2.0)
TRADING_DAYS = 252
PERCENT = 100.0
RS_FORMS = ("standard", "paper-minus")
OUTPUT_COLUMNS = ("parkinson", "gk", "rs", "composite", "log_vol")


@dataclass(frozen=True)
class LogRanges:
    h: float
    l: float
    c: float
    j: float = 0.0


@dataclass(frozen=True)
class DailyVariance:
    parkinson: float
    garman_klass: float
    rogers_satchell: float
    composite: float
    log_vol: float


def log_ranges(bar: OhlcBar, prev_close: float | None = None) -> LogRanges:
    o = bar.open
    j = math.log(o / prev_close) ** 2 if prev_close is not None else 0.0
    return LogRanges(math.log(bar.high / o), math.log(bar.low / o), math.log(bar.close / o), j)


def parkinson(r: LogRanges) -> float:
    return (r.h - r.l) ** 2 / (4.0 * LN2)


def garman_klass(r: LogRanges) -> float:
    h, l, c = r.h, r.l, r.c
    return 0.511 * (h - l) ** 2 - 0.383 * c**2 - 0.019 * (c * (h + l) - 2.0 * h * l)


def rogers_satchell(r: LogRanges, form: str = "standard") -> float:
    """``h(h-c) + l(l-c)``; ``form="paper-minus"`` gives ``h(h-c) - l(l-c)``."""
    check_option("rs_form", form, RS_FORMS)
    first, second = r.h * (r.h - r.c), r.l * (r.l - r.c)
    return first + second if form == "standard" else first - second


def log_volatility(
    r: LogRanges, include_overnight: bool = False, rs_form: str = "standard"
) -> DailyVariance:
    p, g, rs = parkinson(r), garman_klass(r), rogers_satchell(r, rs_form)
    composite = (p + g + rs) / 3.0
    if include_overnight:
        composite += r.j
    if not composite > 0.0:
        raise DegenerateBarError(f"composite variance {composite!r} is not positive")
    return DailyVariance(p, g, rs, composite, math.log(PERCENT**2 * TRADING_DAYS * composite))


def iter_daily_variance(
    bars: Sequence[OhlcBar], include_overnight: bool = False, rs_form: str = "standard"
) -> Iterator[tuple[OhlcBar, DailyVariance | DegenerateBarError]]:
    """Yield ``(bar, result)`` per bar; degenerate bars yield the error instead of raising."""
    prev_close = None
    for bar in bars:
        try:
            result = log_volatility(log_ranges(bar, prev_close), include_overnight, rs_form)
        except DegenerateBarError as exc:
            result = exc
        yield bar, result
        prev_close = bar.close


class RangeVolatility(TransformerMixin, BaseEstimator):
    """Composite range-based volatility as a stateless transformer.

    Parameters
    ----------
    rs_form : {"standard", "paper-minus"}
        Sign convention of the Rogers-Satchell second term.
    include_overnight : bool
        Add the squared open-to-previous-close log return to the composite.
        Row ``i`` uses ``X[i-1, 3]`` as previous close; row 0 gets zero.
    on_degenerate : {"raise", "nan"}
        What ``log_vol`` becomes for a bar whose composite is not positive.

    ``transform`` maps an ``(n, 4)`` array of open, high, low, close to an
    ``(n, 5)`` array with columns ``parkinson, gk, rs, composite, log_vol``.
    """

    def __init__(self, rs_form="standard", include_overnight=False, on_degenerate="raise"):
        self.rs_form = rs_form
        self.include_overnight = include_overnight
        self.on_degenerate = on_degenerate

    def fit(self, X, y=None):
        check_option("rs_form", self.rs_form, RS_FORMS)
        check_option("on_degenerate", self.on_degenerate, ("raise", "nan"))
        check_ohlc_array(X)
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        X = check_ohlc_array(X)
        o, hi, lo, cl = X.T
        h, l, c = np.log(hi / o), np.log(lo / o), np.log(cl / o)
        p = (h - l) ** 2 / (4.0 * LN2)
        g = 0.511 * (h - l) ** 2 - 0.383 * c**2 - 0.019 * (c * (h + l) - 2.0 * h * l)
        first, second = h * (h - c), l * (l - c)
        rs = first + second if self.rs_form == "standard" else first - second
        composite = (p + g + rs) / 3.0
        if self.include_overnight and len(X) > 1:
            j = np.zeros(len(X))
            j[1:] = np.log(o[1:] / cl[:-1]) ** 2
            composite = composite + j
        bad = ~(composite > 0.0)
        if bad.any() and self.on_degenerate == "raise":
            raise DegenerateBarError(f"{int(bad.sum())} bar(s) have non-positive composite variance")
        with np.errstate(divide="ignore", invalid="ignore"):
            log_vol = np.where(bad, np.nan, np.log(PERCENT**2 * TRADING_DAYS * np.where(bad, 1.0, composite)))
        return np.column_stack([p, g, rs, composite, log_vol])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(OUTPUT_COLUMNS, dtype=object)
