"""Wavelet-domain copy-move forgery synthesis and block-matching detection."""
from .detect import DetectionMap, DetectorParams, Feature, detect
from .forge import Blend, ForgeryOutput, ForgerySpec, forge_dwt, forge_spatial
from .imagecore import ColorSpace, Image, Mask, Region, load_png, save_png
from .metrics import CorpusSummary, MetricsReport, score, summarize
from .wavelet import SubbandPyramid, WaveletKind, dwt2, idwt2

__all__ = [
    "Blend", "ColorSpace", "CorpusSummary", "DetectionMap", "DetectorParams", "Feature",
    "ForgeryOutput", "ForgerySpec", "Image", "Mask", "MetricsReport", "Region",
    "SubbandPyramid", "WaveletKind", "detect", "dwt2", "forge_dwt", "forge_spatial",
    "idwt2", "load_png", "save_png", "score", "summarize",
]
