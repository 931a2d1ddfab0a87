"""Seeded synthetic scenarios: GBM OHLC bars, tweet streams, exogenous series.

Random source
-------------
Every draw comes from ``numpy.random.Generator(numpy.random.PCG64(seed))``
as uniforms ``u = random() + 2**-54`` (strictly inside (0, 1)). Gaussians
are ``ndtri(u)``, Poisson counts ``poisson.ppf(u, lam)``, and everything
else is a threshold or ``floor`` on ``u``. Draw order for a scenario:

1. ``n_days x 7`` latent innovations (row-major, one row per trading day);
2. price paths, one row per trading day: ``steps`` increments, then in
   ``"bridge"`` mode ``2 * steps`` uniforms for interval maxima and minima;
3. one tweet-count uniform per calendar day;
4. ``9`` uniforms per tweet: time of day, media flag, retweet flag,
   label, template, like/retweet/quote/reply counts.

Latent model
------------
A unit-variance AR(1) factor ``g`` sets the day's log-variance
``ln(daily_vol_base) + log_vol_std * g``. Tweet activity, sentiment
dispersion and each exogenous series load on ``g`` through
``rho * g + sqrt(1 - rho**2) * eta``, with ``eta`` an AR(1) of persistence
``noise_persistence`` (iid by default). The loadings ``rho``
are solved from the correlation targets after measuring how much the
range estimator noise, Poisson counting and label sampling attenuate the
observed correlations (a fixed-seed pilot run, independent of ``seed``).
Weekend tweets reuse the preceding Friday's latent state.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import poisson

from .exceptions import InfeasibleScenarioError, MoonvolError
from .market_data import (
    EXCHANGE_TZ,
    ExogenousSeries,
    OhlcBar,
    TradingCalendar,
    TweetRecord,
    write_exogenous_csv,
    write_ohlc_csv,
    write_tweets_jsonl,
)
from .volatility import LN2

_TINY = 2.0**-54
PILOT_SEED = 20210127
PILOT_DAYS = 4000
PILOT_SAMPLES = 40000
EXTREMES = ("grid", "bridge")

TEMPLATES = {
    1: (
        "{s} to the moon",
        "love {s} so much",
        "{s} looking great today",
        "bullish on {s}",
        "{s} gains are amazing",
        "{s} to the MOON!!",
    ),
    -1: (
        "{s} is a scam",
        "terrible day for {s}",
        "sell {s} before the crash",
        "bearish on {s}",
        "{s} losses hurt",
        "this {s} dump is awful",
    ),
    0: (
        "watching {s} today",
        "{s} volume update",
        "anyone trading {s}",
        "{s} chart posted",
        "{s} earnings date",
        "what time does {s} open",
    ),
}
EXOGENOUS_LEVELS = {"VIX": (25.0, 5.0), "M": (20.0, 6.0), "YOLO1": (3.0, 1.0), "YOLO2": (30.0, 8.0)}
_LATENT_COLUMNS = ("g", "activity", "sentiment", "YOLO1", "YOLO2", "M", "VIX")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_days: int = 250
    daily_vol_base: float = 4e-4
    vol_persistence: float = 0.8
    noise_persistence: float = 0.0
    activity_vol_corr: float = 0.6
    sentiment_vol_corr: float = -0.1
    base_tweet_rate: float = 40.0
    intraday_steps: int = 390
    log_vol_std: float = 1.0
    activity_std: float = 1.0
    sentiment_gain: float = 0.75
    yolo1_vol_corr: float = 0.6
    yolo2_vol_corr: float = 0.4
    m_vol_corr: float = 0.3
    vix_vol_corr: float = 0.3
    media_fraction: float = 0.15
    retweet_fraction: float = 0.15
    start_date: str = "2020-10-01"
    start_price: float = 20.0
    symbol: str = "GME"
    extremes: str = "grid"

    def __post_init__(self):
        problems = []
        if self.n_days < 2:
            problems.append("n_days must be >= 2")
        if not self.daily_vol_base > 0:
            problems.append("daily_vol_base must be > 0")
        if not 0 <= self.vol_persistence < 1 or not 0 <= self.noise_persistence < 1:
            problems.append("vol_persistence and noise_persistence must be in [0, 1)")
        for name in ("activity_vol_corr", "sentiment_vol_corr", "yolo1_vol_corr",
                     "yolo2_vol_corr", "m_vol_corr", "vix_vol_corr"):
            if not -1 < getattr(self, name) < 1:
                problems.append(f"{name} must be in (-1, 1)")
        if not self.base_tweet_rate > 0:
            problems.append("base_tweet_rate must be > 0")
        if self.intraday_steps < 100:
            problems.append("intraday_steps must be >= 100")
        if self.log_vol_std < 0 or self.activity_std < 0 or self.sentiment_gain < 0:
            problems.append("log_vol_std, activity_std and sentiment_gain must be >= 0")
        if not (0 <= self.media_fraction < 1 and 0 <= self.retweet_fraction < 1):
            problems.append("media_fraction and retweet_fraction must be in [0, 1)")
        if not self.start_price > 0:
            problems.append("start_price must be > 0")
        if self.extremes not in EXTREMES:
            problems.append(f"extremes must be one of {EXTREMES}")
        try:
            dt.date.fromisoformat(self.start_date)
        except (TypeError, ValueError):
            problems.append("start_date must be YYYY-MM-DD")
        if problems:
            raise MoonvolError("invalid scenario: " + "; ".join(problems))

    @classmethod
    def gme(cls, **overrides) -> "ScenarioConfig":
        """Correlation targets from the GameStop correlation table."""
        params = dict(
            activity_vol_corr=0.699,
            sentiment_vol_corr=-0.119,
            yolo1_vol_corr=0.762,
            yolo2_vol_corr=0.527,
            symbol="GME",
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise MoonvolError(f"unknown scenario field(s): {', '.join(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


class Scenario(NamedTuple):
    bars: list
    tweets: list
    exogenous: list


class _Uniforms:
    def __init__(self, seed):
        self.gen = np.random.Generator(np.random.PCG64(seed))

    def __call__(self, shape):
        return self.gen.random(shape) + _TINY

    def normal(self, shape):
        return ndtri(self(shape))


def _relative_paths(draw, variances, steps, extremes="grid"):
    """Log high, low, close relative to the open for one path per variance."""
    variances = np.asarray(variances, dtype=float)
    k = len(variances)
    step_var = variances / steps
    u = draw((k, (3 if extremes == "bridge" else 1) * steps))
    x = np.cumsum(ndtri(u[:, :steps]) * np.sqrt(step_var)[:, None], axis=1)
    c = x[:, -1]
    if extremes == "grid":
        h = np.maximum(x.max(axis=1), 0.0)
        l = np.minimum(x.min(axis=1), 0.0)
        return h, l, c
    a = np.concatenate([np.zeros((k, 1)), x[:, :-1]], axis=1)
    mid, gap2 = a + x, (x - a) ** 2
    two_v = 2.0 * step_var[:, None]
    h = 0.5 * (mid + np.sqrt(gap2 - two_v * np.log(u[:, steps:2 * steps]))).max(axis=1)
    l = 0.5 * (mid - np.sqrt(gap2 - two_v * np.log(u[:, 2 * steps:]))).min(axis=1)
    return np.maximum(h, np.maximum(c, 0.0)), np.minimum(l, np.minimum(c, 0.0)), c


def gbm_day(rng, open_price, daily_variance, steps, day=dt.date(1970, 1, 1), extremes="grid") -> OhlcBar:
    """One driftless log-Brownian trading day sampled on ``steps`` increments.

    ``rng`` is a seed or a :class:`numpy.random.Generator`. With
    ``extremes="grid"`` high/low are the max/min over the sampled points
    (open included); ``"bridge"`` instead draws the exact extremes of the
    Brownian bridge between consecutive points.
    """
    if not open_price > 0 or daily_variance < 0 or steps < 1:
        raise MoonvolError("need open > 0, daily_variance >= 0, steps >= 1")
    if extremes not in EXTREMES:
        raise MoonvolError(f"extremes must be one of {EXTREMES}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.Generator(np.random.PCG64(rng))
    draw = lambda shape: gen.random(shape) + _TINY
    h, l, c = (float(a[0]) for a in _relative_paths(draw, [daily_variance], steps, extremes))
    o = float(open_price)
    if daily_variance == 0:
        return OhlcBar(day, o, o, o, o)
    close = o * math.exp(c)
    return OhlcBar(day, o, max(o * math.exp(h), o, close), min(o * math.exp(l), o, close), close)


def monte_carlo_range_estimates(
    n_days, daily_variance, steps, seed=0, extremes="grid", chunk=1000
) -> dict[str, float]:
    """Sample means of the range estimators over simulated GBM days."""
    draw = _Uniforms(seed)
    sums = dict.fromkeys(("parkinson", "garman_klass", "rogers_satchell", "composite"), 0.0)
    done = 0
    while done < n_days:
        k = min(chunk, n_days - done)
        h, l, c = _relative_paths(draw, np.full(k, daily_variance), steps, extremes)
        p = (h - l) ** 2 / (4.0 * LN2)
        g = 0.511 * (h - l) ** 2 - 0.383 * c**2 - 0.019 * (c * (h + l) - 2.0 * h * l)
        r = h * (h - c) + l * (l - c)
        sums["parkinson"] += p.sum()
        sums["garman_klass"] += g.sum()
        sums["rogers_satchell"] += r.sum()
        sums["composite"] += ((p + g + r) / 3.0).sum()
        done += k
    return {k: float(v / n_days) for k, v in sums.items()}


def _ar1(innovations, phi):
    out = np.empty_like(innovations)
    out[0] = innovations[0]
    scale = math.sqrt(1.0 - phi * phi)
    for t in range(1, len(innovations)):
        out[t] = phi * out[t - 1] + scale * innovations[t]
    return out


def weekdays(start: dt.date, n: int) -> list[dt.date]:
    days, day = [], start
    while len(days) < n:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


@lru_cache(maxsize=32)
def _estimator_log_noise_var(steps, extremes):
    draw = _Uniforms(PILOT_SEED)
    h, l, c = _relative_paths(draw, np.ones(PILOT_DAYS), steps, extremes)
    p = (h - l) ** 2 / (4.0 * LN2)
    g = 0.511 * (h - l) ** 2 - 0.383 * c**2 - 0.019 * (c * (h + l) - 2.0 * h * l)
    r = h * (h - c) + l * (l - c)
    return float(np.var(np.log((p + g + r) / 3.0)))


def _group_sizes(n):
    """Calendar days merged into each trading day for a weekday calendar (Friday takes 3)."""
    return np.where(np.arange(n) % 5 == 4, 3, 1)


@lru_cache(maxsize=32)
def _feature_attenuation(base_rate, activity_std, sentiment_gain, text_fraction):
    """Pilot correlations of observed features with independent latent drivers.

    Returns ``(corr(MOON1, w_a), corr(MOON2, w_a), corr(MOON2, w_s))``. MOON2
    depends on activity too, because the sample std of a small bucket is
    biased low and bucket size follows activity.
    """
    draw = _Uniforms(PILOT_SEED + 1)
    n = PILOT_SAMPLES
    w_a, w_s = draw.normal(n), draw.normal(n)
    k = _group_sizes(n)
    lam = base_rate * np.exp(activity_std * w_a)
    merged = poisson.ppf(draw(n), k * lam) / k
    ok = merged > 0
    c_a = np.corrcoef(np.log(merged[ok]), w_a[ok])[0, 1]
    n_text = poisson.ppf(draw(n), k * lam * text_fraction).astype(int)
    q = ndtr(sentiment_gain * w_s)
    owner = np.repeat(np.arange(n), n_text)
    u = draw(len(owner))
    half = q[owner] / 2.0
    labels = np.where(u < half, 1.0, np.where(u < 2 * half, -1.0, 0.0))
    cnt = np.bincount(owner, minlength=n)
    s1 = np.bincount(owner, labels, minlength=n)
    s2 = np.bincount(owner, labels**2, minlength=n)
    ok = cnt > 0
    std = np.sqrt(np.maximum(s2[ok] / cnt[ok] - (s1[ok] / cnt[ok]) ** 2, 0.0))
    if np.ptp(std) == 0:
        return float(c_a), 0.0, 0.0
    d_a = np.corrcoef(std, w_a[ok])[0, 1]
    d_s = np.corrcoef(std, w_s[ok])[0, 1] if sentiment_gain > 0 else 0.0
    return float(c_a), float(d_a), float(d_s)


def loadings(config: ScenarioConfig) -> dict[str, float]:
    """Latent loadings on ``g`` that hit the configured correlation targets.

    Raises :class:`InfeasibleScenarioError` when a target is out of reach
    given the noise in the observed series, i.e. the solved loading has
    magnitude >= 1 and the latent correlation matrix would be indefinite.
    """
    tau2 = _estimator_log_noise_var(config.intraday_steps, config.extremes)
    s = config.log_vol_std
    rho_v = s / math.sqrt(s * s + tau2) if s > 0 else 0.0
    text_fraction = (1 - config.media_fraction) * (1 - config.retweet_fraction)
    c_a, d_a, d_s = _feature_attenuation(
        config.base_tweet_rate, config.activity_std, config.sentiment_gain, text_fraction
    )
    out = {}

    def solve(name, field_name, target, offset, gain):
        if target == offset:
            out[name] = 0.0
            return
        rho = (target - offset) / gain if gain != 0 else math.inf
        if not abs(rho) < 1:
            raise InfeasibleScenarioError(
                f"{field_name}={getattr(config, field_name)} is infeasible under the observation noise"
                f" (solved latent loading {rho:.3f})"
            )
        out[name] = rho

    solve("activity", "activity_vol_corr", config.activity_vol_corr, 0.0, rho_v * c_a)
    solve("sentiment", "sentiment_vol_corr", config.sentiment_vol_corr,
          rho_v * out["activity"] * d_a, rho_v * d_s)
    for name, field_name in (("YOLO1", "yolo1_vol_corr"), ("YOLO2", "yolo2_vol_corr"),
                             ("M", "m_vol_corr"), ("VIX", "vix_vol_corr")):
        solve(name, field_name, getattr(config, field_name), 0.0, rho_v)
    return out


def latent_factors(config: ScenarioConfig, draw: _Uniforms | None = None) -> dict[str, np.ndarray]:
    draw = draw or _Uniforms(config.seed)
    z = draw.normal((config.n_days, len(_LATENT_COLUMNS)))
    phi = config.vol_persistence
    g = _ar1(z[:, 0], phi)
    rhos = loadings(config)
    out = {"g": g}
    for j, name in enumerate(_LATENT_COLUMNS[1:], start=1):
        rho = rhos[name]
        out[name] = rho * g + math.sqrt(1.0 - rho * rho) * _ar1(z[:, j], config.noise_persistence)
    return out


def simulate_scenario(config: ScenarioConfig) -> Scenario:
    """Generate bars, tweets and exogenous series; deterministic in ``config``."""
    loadings(config)
    draw = _Uniforms(config.seed)
    latent = latent_factors(config, draw)
    days = weekdays(dt.date.fromisoformat(config.start_date), config.n_days)
    variances = config.daily_vol_base * np.exp(config.log_vol_std * latent["g"])

    chunk = max(1, 2_000_000 // config.intraday_steps)
    parts = [
        _relative_paths(draw, variances[i:i + chunk], config.intraday_steps, config.extremes)
        for i in range(0, config.n_days, chunk)
    ]
    h, l, c = (np.concatenate(p) for p in zip(*parts))
    log_open = math.log(config.start_price) + np.concatenate([[0.0], np.cumsum(c[:-1])])
    opens = np.exp(log_open)
    bars = []
    for i, day in enumerate(days):
        o = float(opens[i])
        close = float(opens[i + 1]) if i + 1 < len(days) else o * math.exp(c[i])
        high = max(o * math.exp(h[i]), o, close)
        low = min(o * math.exp(l[i]), o, close)
        bars.append(OhlcBar(day, o, high, low, close))

    tweets = _simulate_tweets(config, draw, days, latent)
    exogenous = _exogenous(config, days, latent)
    return Scenario(bars, tweets, exogenous)


def _calendar_days(days):
    """Every calendar date from the first to the last trading day, with its trading-day index."""
    out, idx = [], 0
    day = days[0]
    while day <= days[-1]:
        if idx + 1 < len(days) and day >= days[idx + 1]:
            idx += 1
        out.append((day, idx))
        day += dt.timedelta(days=1)
    return out


def _simulate_tweets(config, draw, days, latent):
    cal = _calendar_days(days)
    owner = np.array([i for _, i in cal])
    lam = config.base_tweet_rate * np.exp(config.activity_std * latent["activity"][owner])
    counts = poisson.ppf(draw(len(cal)), lam).astype(np.int64)
    u = draw((int(counts.sum()), 9))
    q = ndtr(config.sentiment_gain * latent["sentiment"][owner])
    texts = {label: [t.format(s=config.symbol) for t in tpl] for label, tpl in TEMPLATES.items()}
    utc = dt.timezone.utc
    tweets, k = [], 0
    for (day, _), n, q_day in zip(cal, counts.tolist(), q.tolist()):
        if n == 0:
            continue
        block = u[k:k + n]
        order = np.argsort(block[:, 0], kind="stable")
        midnight = dt.datetime(day.year, day.month, day.day)
        for j in order.tolist():
            t, media, rt, lab, tpl, likes, rts, quotes, replies = block[j].tolist()
            label = 1 if lab < q_day / 2 else (-1 if lab < q_day else 0)
            choices = texts[label]
            local = midnight + dt.timedelta(seconds=int(t * 86400))
            tweets.append(
                TweetRecord(
                    id=str(k + j + 1),
                    created_at=local.replace(tzinfo=EXCHANGE_TZ).astimezone(utc),
                    text=choices[min(int(tpl * len(choices)), len(choices) - 1)],
                    has_media=media < config.media_fraction,
                    is_retweet=rt < config.retweet_fraction,
                    like_count=int(-math.log(likes) * 5.0),
                    retweet_count=int(-math.log(rts) * 1.0),
                    quote_count=int(-math.log(quotes) * 0.3),
                    reply_count=int(-math.log(replies) * 1.0),
                )
            )
        k += n
    return tweets


def _exogenous(config, days, latent):
    """VIX on trading days; M and YOLO series also on weekends (Friday's value carried)."""
    cal = _calendar_days(days)
    out = []
    for name in ("VIX", "M", "YOLO1", "YOLO2"):
        level, scale = EXOGENOUS_LEVELS[name]
        values = level + scale * latent[name]
        if name == "VIX":
            points = tuple((d, float(v)) for d, v in zip(days, values))
        else:
            points = tuple((d, float(values[i])) for d, i in cal)
        out.append(ExogenousSeries(name, points))
    return out


def scenario_calendar(scenario: Scenario) -> TradingCalendar:
    return TradingCalendar.from_bars(scenario.bars)


def write_scenario(scenario: Scenario, out_dir, config: ScenarioConfig | None = None) -> list[Path]:
    """Write the files the parsers read: ``ohlc.csv``, ``tweets.jsonl``, ``exog_<name>.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "ohlc.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        write_ohlc_csv(scenario.bars, fh)
    written.append(path)
    path = out_dir / "tweets.jsonl"
    with path.open("w", encoding="utf-8", newline="") as fh:
        write_tweets_jsonl(scenario.tweets, fh)
    written.append(path)
    for series in scenario.exogenous:
        path = out_dir / f"exog_{series.name.lower()}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            write_exogenous_csv(series, fh)
        written.append(path)
    if config is not None:
        path = out_dir / "scenario.json"
        path.write_text(config.to_json(), encoding="utf-8")
        written.append(path)
    return written
