"""Radar + weather-station rainfall nowcasting toolkit."""

from ._core import (
    PipelineError,
    Predictor,
    compute_metrics,
    dataset_summary,
    dequantize,
    fill_precip,
    quantize,
    spline_fill,
    wind_decompose,
    wind_reconstitute,
    zr_rainfall,
)

__all__ = [
    "PipelineError",
    "Predictor",
    "compute_metrics",
    "dataset_summary",
    "dequantize",
    "fill_precip",
    "quantize",
    "spline_fill",
    "wind_decompose",
    "wind_reconstitute",
    "zr_rainfall",
]

__version__ = "0.1.0"
