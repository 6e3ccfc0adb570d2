"""Volatility forecasting with rolling-window volatility factors.

Measurement (realized volatility from quotes), time-varying factor
extraction, factor-augmented AR/HAR/MIDAS/LSTM forecasting, statistical and
economic evaluation, cointegration screening, and a volatility-targeted
pairs-trading backtest, plus seeded synthetic generators that act as
ground-truth oracles for all of it.
"""

__version__ = "0.1.0"
