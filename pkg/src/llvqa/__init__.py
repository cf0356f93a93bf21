"""No-reference quality assessment for low-light and enhanced videos."""

from .estimators import FeatureSubset, MLRFusionRegressor, QualityRegressor, VideoFeatureExtractor
from .media_io import SamplingPlan, Video, load_video
from .metrics import evaluate, plcc, rmse, srcc

__version__ = "0.1.0"

__all__ = [
    "FeatureSubset",
    "MLRFusionRegressor",
    "QualityRegressor",
    "SamplingPlan",
    "Video",
    "VideoFeatureExtractor",
    "evaluate",
    "load_video",
    "plcc",
    "rmse",
    "srcc",
]
