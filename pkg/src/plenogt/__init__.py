"""Plenoptic/conventional camera simulation and sub-pixel calibration ground truth."""

__version__ = "0.1.0"
