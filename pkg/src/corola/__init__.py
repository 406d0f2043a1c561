"""Online low-rank background modelling with MRF foreground segmentation."""
from .errors import (CorolaError, DegenerateColumnError, DegenerateInputError, DimensionError,
                     EstimationFailed, FillError, InitializationError, NoSupportError,
                     NumericalError)
from .pipeline import Corola, FrameResult, ModelState, Params, initialize, process_frame
from .segmentation import BACKEND, MrfProblem, min_cut, segment

__all__ = [
    "BACKEND", "Corola", "CorolaError", "DegenerateColumnError", "DegenerateInputError",
    "DimensionError", "EstimationFailed", "FillError", "FrameResult", "InitializationError",
    "ModelState", "MrfProblem", "NoSupportError", "NumericalError", "Params", "initialize",
    "min_cut", "process_frame", "segment",
]
__version__ = "0.1.0"
