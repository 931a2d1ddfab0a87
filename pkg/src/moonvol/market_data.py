"""Parsing, validation and calendar alignment of external inputs.

All parsers take a binary (or text) stream and are pure functions of it.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence
from zoneinfo import ZoneInfo

from .exceptions import DuplicateDateError, InvariantError, LeadingGapError, ParseError

EXCHANGE_TZ = ZoneInfo("America/New_York")
EXOGENOUS_NAMES = ("VIX", "M", "YOLO1", "YOLO2")
OHLC_HEADER = ["date", "open", "high", "low", "close"]
EXOGENOUS_HEADER = ["date", "value"]
_COUNT_FIELDS = ("like_count", "retweet_count", "quote_count", "reply_count")


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float

    def violations(self) -> list[str]:
        """Names of the violated price bounds (empty for a valid bar)."""
        out = []
        for name in ("open", "high", "low", "close"):
            if not getattr(self, name) > 0:
                out.append(f"{name} <= 0")
        if self.high < self.low:
            out.append("high < low")
        if self.low > min(self.open, self.close):
            out.append("low > min(open, close)")
        if self.high < max(self.open, self.close):
            out.append("high < max(open, close)")
        return out


@dataclass(frozen=True)
class TweetRecord:
    id: str
    created_at: dt.datetime
    text: str
    has_media: bool = False
    is_retweet: bool = False
    like_count: int = 0
    retweet_count: int = 0
    quote_count: int = 0
    reply_count: int = 0

    @property
    def engagement(self) -> int:
        return self.like_count + self.retweet_count + self.quote_count + self.reply_count

    def local_date(self, tz=EXCHANGE_TZ) -> dt.date:
        return self.created_at.astimezone(tz).date()


@dataclass(frozen=True)
class ExogenousSeries:
    name: str
    points: tuple[tuple[dt.date, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        dates = [d for d, _ in self.points]
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise ValueError(f"{self.name}: dates must be strictly increasing ({a} then {b})")

    def as_dict(self) -> dict[dt.date, float]:
        return dict(self.points)


@dataclass(frozen=True)
class TradingCalendar:
    trading_days: tuple[dt.date, ...] = field(default_factory=tuple)

    def __post_init__(self):
        days = tuple(self.trading_days)
        object.__setattr__(self, "trading_days", days)
        for a, b in zip(days, days[1:]):
            if not a < b:
                raise ValueError(f"calendar must be strictly increasing ({a} then {b})")

    @classmethod
    def from_bars(cls, bars: Iterable[OhlcBar]) -> "TradingCalendar":
        return cls(tuple(sorted(b.date for b in bars)))

    def __len__(self):
        return len(self.trading_days)

    def __iter__(self):
        return iter(self.trading_days)

    def __contains__(self, day):
        return day in self._members

    @property
    def _members(self) -> frozenset:
        members = self.__dict__.get("_member_set")
        if members is None:
            members = frozenset(self.trading_days)
            object.__setattr__(self, "_member_set", members)
        return members


def _text(stream: IO) -> io.TextIOBase:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def parse_ohlc_csv(stream) -> list[OhlcBar]:
    """Read ``date,open,high,low,close`` rows into validated bars, ascending by date."""
    reader = csv.reader(_text(stream))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != OHLC_HEADER:
        raise ParseError(f"expected header {','.join(OHLC_HEADER)}", line=1)
    bars: list[OhlcBar] = []
    seen: dict[dt.date, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 fields, got {len(row)}", line=line_no)
        try:
            bar = OhlcBar(parse_date(row[0]), *(float(x) for x in row[1:]))
        except ValueError as exc:
            raise ParseError(f"malformed row ({exc})", line=line_no) from None
        bad = bar.violations()
        if bad:
            raise InvariantError("; ".join(bad), line=line_no)
        if bar.date in seen:
            raise DuplicateDateError(
                f"duplicate date {bar.date} (first seen at line {seen[bar.date]})", line=line_no
            )
        seen[bar.date] = line_no
        bars.append(bar)
    bars.sort(key=lambda b: b.date)
    return bars


def format_float(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_ohlc_csv(bars: Sequence[OhlcBar], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(OHLC_HEADER)
    for b in bars:
        writer.writerow([b.date.isoformat()] + [format_float(x) for x in (b.open, b.high, b.low, b.close)])


def parse_timestamp(text: str) -> dt.datetime:
    """Parse an ISO-8601 instant; a trailing ``Z`` and naive values mean UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(s)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc)


def format_timestamp(ts: dt.datetime) -> str:
    return ts.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _count(value, name, line_no) -> int:
    if value is None:
        return 0
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ParseError(f"{name} must be a non-negative integer", line=line_no)
    return value


def parse_tweets_jsonl(stream) -> list[TweetRecord]:
    """Read one tweet object per line, returning records sorted by ``created_at``.

    Line numbers in errors are 1-based. Blank lines are skipped.
    """
    records = []
    for line_no, line in enumerate(_text(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line=line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line=line_no)
        for key in ("created_at", "text"):
            if key not in obj or obj[key] is None:
                raise ParseError(f"missing required field {key!r}", line=line_no)
        if not isinstance(obj["text"], str):
            raise ParseError("text must be a string", line=line_no)
        try:
            created = parse_timestamp(str(obj["created_at"]))
        except ValueError:
            raise ParseError(f"invalid created_at {obj['created_at']!r}", line=line_no) from None
        metrics = obj.get("public_metrics") or {}
        if not isinstance(metrics, dict):
            raise ParseError("public_metrics must be an object", line=line_no)
        records.append(
            TweetRecord(
                id=str(obj.get("id", line_no)),
                created_at=created,
                text=obj["text"],
                has_media=bool(obj.get("has_media", False)),
                is_retweet=bool(obj.get("is_retweet", False)),
                **{name: _count(metrics.get(name), name, line_no) for name in _COUNT_FIELDS},
            )
        )
    records.sort(key=lambda r: r.created_at)
    return records


def tweet_to_json(record: TweetRecord) -> str:
    obj = {
        "id": record.id,
        "created_at": format_timestamp(record.created_at),
        "text": record.text,
        "has_media": record.has_media,
        "is_retweet": record.is_retweet,
        "public_metrics": {name: getattr(record, name) for name in _COUNT_FIELDS},
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_tweets_jsonl(records: Iterable[TweetRecord], stream: IO[str]) -> None:
    for r in records:
        stream.write(tweet_to_json(r))
        stream.write("\n")


def filter_for_sentiment(records: Iterable[TweetRecord]) -> list[TweetRecord]:
    """Keep text-only originals: drop tweets with media attachments and retweets."""
    return [r for r in records if not r.has_media and not r.is_retweet]


def parse_exogenous_csv(stream, name: str) -> ExogenousSeries:
    """Read a ``date,value`` file. Rows may come in any order; duplicates are rejected."""
    reader = csv.reader(_text(stream))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != EXOGENOUS_HEADER:
        raise ParseError("expected header date,value", line=1)
    points = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line=line_no)
        try:
            day, value = parse_date(row[0]), float(row[1])
        except ValueError as exc:
            raise ParseError(f"malformed row ({exc})", line=line_no) from None
        if day in points:
            raise DuplicateDateError(f"duplicate date {day}", line=line_no)
        points[day] = value
    return ExogenousSeries(name, tuple(sorted(points.items())))


def write_exogenous_csv(series: ExogenousSeries, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EXOGENOUS_HEADER)
    for day, value in series.points:
        writer.writerow([day.isoformat(), format_float(value)])


def parse_calendar(stream) -> TradingCalendar:
    """One ``YYYY-MM-DD`` per line; blank lines and ``#`` comments ignored."""
    days = set()
    for line_no, line in enumerate(_text(stream), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            day = parse_date(line)
        except ValueError:
            raise ParseError(f"invalid date {line!r}", line=line_no) from None
        if day in days:
            raise DuplicateDateError(f"duplicate date {day}", line=line_no)
        days.add(day)
    return TradingCalendar(tuple(sorted(days)))


def align_to_calendar(series: ExogenousSeries, calendar: TradingCalendar) -> ExogenousSeries:
    """Resample ``series`` onto the trading days of ``calendar``.

    The output has exactly one point per trading day. Values on non-trading
    dates are dropped, and trading days without a value take the most recent
    earlier value (including days after the series ends). A trading day
    earlier than every series value raises :class:`LeadingGapError`.
    """
    points = series.points
    out = []
    i, current = 0, None
    for day in calendar.trading_days:
        while i < len(points) and points[i][0] <= day:
            current = points[i][1]
            i += 1
        if current is None:
            raise LeadingGapError(day)
        out.append((day, current))
    return ExogenousSeries(series.name, tuple(out))
