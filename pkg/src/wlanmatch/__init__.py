"""Controlled matching game for AP-user association and throughput sharing in 802.11 WLANs."""
from .kernels import BACKEND
from .matching import Matching, PreferenceProfile, bdaa, build_preferences
from .model import Coalition, RateMatrix, Scenario
from .pipeline import RunReport, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Coalition",
    "Matching",
    "PreferenceProfile",
    "RateMatrix",
    "RunReport",
    "Scenario",
    "bdaa",
    "build_preferences",
    "run_pipeline",
]
