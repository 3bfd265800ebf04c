"""Viral-post detection and counterfactual engagement-impact analysis."""

__version__ = "0.1.0"
