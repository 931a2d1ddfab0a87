"""Social-media activity, tweet sentiment and range-based stock volatility.

The pipeline turns daily OHLC bars into a log-volatility proxy, scores
tweets with a lexicon, builds per-trading-day activity (``moon1``) and
sentiment-dispersion (``moon2``) features, and compares nested lagged OLS
models M1-M8 by in-sample R^2.
"""
__version__ = "0.1.0"

from .exceptions import MoonvolError
from .market_data import (
    ExogenousSeries,
    OhlcBar,
    TradingCalendar,
    TweetRecord,
    align_to_calendar,
    filter_for_sentiment,
    parse_exogenous_csv,
    parse_ohlc_csv,
    parse_tweets_jsonl,
)
from .regress import MODELS, NestedModelSuite, OLSRegressor, fit_ols, fit_suite, pearson_matrix
from .sentiment import Lexicon, LexiconSentiment, score_batch, score_compound
from .signals import DailySignalRow, FeatureConfig, build_signal_table
from .synth import ScenarioConfig, simulate_scenario
from .volatility import RangeVolatility, log_ranges, log_volatility

__all__ = [
    "DailySignalRow",
    "ExogenousSeries",
    "FeatureConfig",
    "Lexicon",
    "LexiconSentiment",
    "MODELS",
    "MoonvolError",
    "NestedModelSuite",
    "OLSRegressor",
    "OhlcBar",
    "RangeVolatility",
    "ScenarioConfig",
    "TradingCalendar",
    "TweetRecord",
    "align_to_calendar",
    "build_signal_table",
    "filter_for_sentiment",
    "fit_ols",
    "fit_suite",
    "log_ranges",
    "log_volatility",
    "parse_exogenous_csv",
    "parse_ohlc_csv",
    "parse_tweets_jsonl",
    "pearson_matrix",
    "score_batch",
    "score_compound",
    "simulate_scenario",
]
