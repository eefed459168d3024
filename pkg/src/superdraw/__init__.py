"""Learned drawdown policies for means-tested retirement accounts."""

__version__ = "0.1.0"
