"""Adaptive DDPG portfolio agent, Markowitz baselines and backtests."""

from ._bullbear import *  # noqa: F401,F403
from ._bullbear import __doc__  # noqa: F401

__version__ = "0.1.0"
