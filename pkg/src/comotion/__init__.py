"""Co-attention recurrent sequence predictor for skeleton motion time series."""

__version__ = "0.1.0"

from .errors import (
    ComotionError,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
)

__all__ = [
    "ComotionError",
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "__version__",
]
