"""Per-trading-day Twitter features and the regression-ready signal table."""
from __future__ import annotations

import bisect
import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

from .exceptions import DegenerateBarError, DegenerateRangeError, EmptyTableError, MoonvolError
from .market_data import (
    EXCHANGE_TZ,
    EXOGENOUS_NAMES,
    ExogenousSeries,
    OhlcBar,
    TradingCalendar,
    TweetRecord,
    align_to_calendar,
    filter_for_sentiment,
)
from .sentiment import DEFAULT_THRESHOLDS, Lexicon, SentimentScore, score_batch
from .validation import check_option
from .volatility import iter_daily_variance

AGGREGATORS = ("std", "mean", "weighted", "ratio")
LOG_BASES = {"e": 1.0, "10": math.log(10.0)}
TABLE_COLUMNS = ("date", "v", "moon1", "moon2", "yolo1", "yolo2", "m", "vix")
_EXOG_COLUMN = {"VIX": "vix", "M": "m", "YOLO1": "yolo1", "YOLO2": "yolo2"}


@dataclass(frozen=True)
class DailySignalRow:
    date: dt.date
    v: float
    moon1: float
    moon2: float
    yolo1: float
    yolo2: float
    m: float
    vix: float

    def get(self, column: str) -> float:
        return getattr(self, column)


@dataclass(frozen=True)
class Drop:
    """One omitted (date, column) with the reason it was omitted."""

    date: dt.date
    column: str
    reason: str

    def format(self) -> str:
        return f"{self.date.isoformat()}\t{self.column}\t{self.reason}"


@dataclass(frozen=True)
class FeatureConfig:
    include_overnight: bool = False
    rs_form: str = "standard"
    merge_forward: bool = False
    aggregator: str = "std"
    log_base: str = "e"
    thresholds: tuple = DEFAULT_THRESHOLDS
    tz: str = "America/New_York"

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def assign_trading_day(day: dt.date, days: Sequence[dt.date], merge_forward: bool = False) -> dt.date:
    """Trading day that absorbs calendar date ``day``.

    By default a non-trading date joins the most recent earlier trading day;
    with ``merge_forward`` it joins the next one. Dates outside the calendar
    clamp to its first/last day.
    """
    if merge_forward:
        i = bisect.bisect_left(days, day)
        return days[min(i, len(days) - 1)]
    i = bisect.bisect_right(days, day) - 1
    return days[max(i, 0)]


def bucket_by_day(
    records: Iterable[TweetRecord],
    calendar: TradingCalendar,
    merge_forward: bool = False,
    tz=EXCHANGE_TZ,
) -> dict[dt.date, list[TweetRecord]]:
    """Partition tweets into trading-day buckets keyed by exchange-local date.

    Every trading day gets a key (possibly with an empty list).
    """
    days = calendar.trading_days
    if not days:
        raise MoonvolError("empty trading calendar")
    buckets: dict[dt.date, list[TweetRecord]] = {d: [] for d in days}
    cache: dict[dt.date, dt.date] = {}
    for rec in records:
        local = rec.created_at.astimezone(tz).date()
        target = cache.get(local)
        if target is None:
            target = cache[local] = assign_trading_day(local, days, merge_forward)
        buckets[target].append(rec)
    return buckets


def daily_counts(records: Iterable[TweetRecord], tz=EXCHANGE_TZ) -> Counter:
    """Tweets per exchange-local calendar date (all tweets, media and retweets included)."""
    return Counter(rec.created_at.astimezone(tz).date() for rec in records)


def _log(x: float, log_base: str) -> float:
    check_option("log_base", log_base, tuple(LOG_BASES))
    return math.log(x) / LOG_BASES[log_base]


def moon1(
    counts: Mapping[dt.date, int],
    calendar: TradingCalendar,
    merge_forward: bool = False,
    log_base: str = "e",
) -> tuple[dict[dt.date, float], list[Drop]]:
    """Log of the tweet count averaged over each trading day's merged dates.

    A trading day's group is itself plus the non-trading calendar dates that
    merge into it (dates with no tweets count as zero). Returns the values
    and a drop list for groups whose mean count is zero.
    """
    days = calendar.trading_days
    if not days:
        raise MoonvolError("empty trading calendar")
    lo, hi = days[0], days[-1]
    if counts:
        lo, hi = min(lo, min(counts)), max(hi, max(counts))
    totals = dict.fromkeys(days, 0)
    sizes = dict.fromkeys(days, 0)
    day = lo
    while day <= hi:
        target = assign_trading_day(day, days, merge_forward)
        totals[target] += counts.get(day, 0)
        sizes[target] += 1
        day += dt.timedelta(days=1)
    values, drops = {}, []
    for d in days:
        merged = totals[d] / sizes[d]
        if merged > 0:
            values[d] = _log(merged, log_base)
        else:
            drops.append(Drop(d, "moon1", "zero activity"))
    return values, drops


def _population_std(xs: Sequence[float]) -> float:
    n = len(xs)
    mean = math.fsum(xs) / n
    return math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / n)


def moon2(buckets: Mapping[dt.date, Sequence[int]]) -> tuple[dict[dt.date, float], list[Drop]]:
    """Population standard deviation of the ternary sentiment in each bucket."""
    values, drops = {}, []
    for d in sorted(buckets):
        xs = buckets[d]
        if not xs:
            drops.append(Drop(d, "moon2", "no text-only tweets"))
            continue
        values[d] = min(1.0, _population_std(xs))
    return values, drops


def aggregate_sentiment(
    buckets: Mapping[dt.date, Sequence[tuple[TweetRecord, SentimentScore]]],
    aggregator: str = "std",
) -> tuple[dict[dt.date, float], list[Drop]]:
    """Reduce each day's scored tweets to one number.

    ``std``: population std of the ternary labels (the default MOON2).
    ``mean``: mean ternary label.
    ``weighted``: ternary mean weighted by ``1 + likes + retweets + quotes + replies``.
    ``ratio``: positive share among polar (non-neutral) tweets.
    """
    check_option("aggregator", aggregator, AGGREGATORS)
    if aggregator == "std":
        return moon2({d: [s.ternary for _, s in items] for d, items in buckets.items()})
    values, drops = {}, []
    for d in sorted(buckets):
        items = buckets[d]
        if aggregator == "ratio":
            pos = sum(1 for _, s in items if s.ternary > 0)
            neg = sum(1 for _, s in items if s.ternary < 0)
            if pos + neg:
                values[d] = pos / (pos + neg)
            else:
                drops.append(Drop(d, "moon2", "no polar tweets"))
            continue
        if not items:
            drops.append(Drop(d, "moon2", "no text-only tweets"))
            continue
        if aggregator == "mean":
            values[d] = math.fsum(s.ternary for _, s in items) / len(items)
        else:
            weights = [1 + rec.engagement for rec, _ in items]
            values[d] = math.fsum(w * s.ternary for w, (_, s) in zip(weights, items)) / math.fsum(weights)
    return values, drops


def log_volatility_series(
    bars: Sequence[OhlcBar], include_overnight: bool = False, rs_form: str = "standard"
) -> tuple[dict[dt.date, float], list[Drop]]:
    values, drops = {}, []
    for bar, result in iter_daily_variance(bars, include_overnight, rs_form):
        if isinstance(result, DegenerateBarError):
            drops.append(Drop(bar.date, "v", "degenerate bar"))
        else:
            values[bar.date] = result.log_vol
    return values, drops


def _as_mapping(series) -> dict:
    if isinstance(series, ExogenousSeries):
        return series.as_dict()
    return dict(series)


def assemble_table(
    v_series: Mapping[dt.date, float],
    moon1_series: Mapping[dt.date, float],
    moon2_series: Mapping[dt.date, float],
    exogenous: Iterable[ExogenousSeries],
    calendar: TradingCalendar | None = None,
) -> tuple[list[DailySignalRow], list[Drop]]:
    """Inner-join all columns by date.

    The window runs from the latest first date to the earliest last date
    across the inputs; its dates are the calendar's trading days if one is
    given, else every date seen in any input. Each date in the window yields
    either a row or one drop entry naming its missing columns.
    """
    columns = {"v": _as_mapping(v_series), "moon1": _as_mapping(moon1_series), "moon2": _as_mapping(moon2_series)}
    exog = {s.name: s for s in exogenous}
    missing = [name for name in EXOGENOUS_NAMES if name not in exog]
    if missing:
        raise MoonvolError(f"missing exogenous series: {', '.join(missing)}")
    for name in EXOGENOUS_NAMES:
        columns[_EXOG_COLUMN[name]] = exog[name].as_dict()
    if any(not col for col in columns.values()):
        empty = [k for k, col in columns.items() if not col]
        raise EmptyTableError(f"no data in column(s): {', '.join(empty)}")
    start = max(min(col) for col in columns.values())
    end = min(max(col) for col in columns.values())
    if start > end:
        raise EmptyTableError(f"input date ranges do not overlap ({start} > {end})")
    if calendar is not None:
        window = [d for d in calendar.trading_days if start <= d <= end]
    else:
        window = sorted({d for col in columns.values() for d in col if start <= d <= end})
    rows, drops = [], []
    for d in window:
        absent = [k for k in TABLE_COLUMNS[1:] if d not in columns[k]]
        if absent:
            drops.append(Drop(d, ",".join(absent), "missing"))
            continue
        rows.append(DailySignalRow(d, **{k: columns[k][d] for k in TABLE_COLUMNS[1:]}))
    if not rows:
        raise EmptyTableError("no date has every column present")
    return rows, drops


def normalize_unit_interval(series: Sequence[float]) -> list[float]:
    """Map linearly so the minimum becomes 0 and the maximum 1."""
    lo, hi = min(series), max(series)
    if not hi > lo:
        raise DegenerateRangeError("cannot normalize a constant series")
    span = hi - lo
    return [(x - lo) / span for x in series]


def build_signal_table(
    bars: Sequence[OhlcBar],
    tweets: Sequence[TweetRecord],
    lexicon: Lexicon,
    exogenous: Iterable[ExogenousSeries],
    calendar: TradingCalendar | None = None,
    config: FeatureConfig = FeatureConfig(),
) -> tuple[list[DailySignalRow], list[Drop]]:
    """Run volatility, sentiment and feature construction end to end.

    Returns the joined rows and every drop recorded along the way, sorted
    by date then column.
    """
    from zoneinfo import ZoneInfo

    tz = ZoneInfo(config.tz)
    calendar = calendar or TradingCalendar.from_bars(bars)
    v, drops_v = log_volatility_series(bars, config.include_overnight, config.rs_form)
    m1, drops_m1 = moon1(daily_counts(tweets, tz), calendar, config.merge_forward, config.log_base)
    text_only = filter_for_sentiment(tweets)
    scores = dict(score_batch(text_only, lexicon, config.thresholds))
    buckets = bucket_by_day(text_only, calendar, config.merge_forward, tz)
    scored = {d: [(rec, scores[rec.id]) for rec in recs] for d, recs in buckets.items()}
    m2, drops_m2 = aggregate_sentiment(scored, config.aggregator)
    aligned = [align_to_calendar(s, calendar) for s in exogenous]
    rows, drops_join = assemble_table(v, m1, m2, aligned, calendar)
    drops = drops_v + drops_m1 + drops_m2 + drops_join
    drops.sort(key=lambda d: (d.date, d.column))
    return rows, drops


def write_signal_table(rows: Sequence[DailySignalRow], stream) -> None:
    from .market_data import format_float

    stream.write(",".join(TABLE_COLUMNS) + "\n")
    for r in rows:
        stream.write(",".join([r.date.isoformat()] + [format_float(r.get(c)) for c in TABLE_COLUMNS[1:]]) + "\n")


def read_signal_table(stream) -> list[DailySignalRow]:
    import csv

    from .exceptions import ParseError
    from .market_data import _text, parse_date

    reader = csv.reader(_text(stream))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(TABLE_COLUMNS):
        raise ParseError(f"expected header {','.join(TABLE_COLUMNS)}", line=1)
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            rows.append(DailySignalRow(parse_date(row[0]), *(float(x) for x in row[1:])))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"malformed row ({exc})", line=line_no) from None
    rows.sort(key=lambda r: r.date)
    return rows
