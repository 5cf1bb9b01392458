"""Stress detection from wearable physiological and sociometric sensors."""

__version__ = "0.1.0"
