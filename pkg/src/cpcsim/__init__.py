"""Collective predictive coding naming-game simulator."""
