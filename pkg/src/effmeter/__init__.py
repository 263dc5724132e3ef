"""Walk-forward intraday backtesting engine for measuring relative market efficiency.

The pipeline: raw trades -> minute bars -> dollar-volume universes ->
universe-relative observations/labels -> reference classifiers (neural,
logistic, random control) -> long/short market-neutral strategy -> monthly
walk-forward experiment -> report series.
"""

__version__ = "0.1.0"
