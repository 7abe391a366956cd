"""Counterfactual necessity/sufficiency explanations and actionable
recourse for black-box decision algorithms over discrete tabular data."""

__version__ = "0.1.0"
