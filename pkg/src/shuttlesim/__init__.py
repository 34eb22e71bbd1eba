"""Microscopic mixed-traffic simulation of low-speed autonomous shuttles.

Gipps car following for human-driven cars and shuttles, logit / C-logit
route choice with iterative assignment, trajectory-based parameter
calibration, GEH-scored OD adjustment, and headway/speed scenario
experiments.
"""

__version__ = "0.1.0"
