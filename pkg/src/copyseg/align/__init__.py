"""Temporal alignment of a similarity map into predicted copied segments."""

from .common import AlignParams, Prediction
from .dp import align_dp
from .dtw import align_dtw
from .hough import align_hough
from .predictions import import_predictions, write_predictions
from .tn import align_tn

ALGORITHMS = {
    "hv": align_hough,
    "tn": align_tn,
    "dp": align_dp,
    "dtw": align_dtw,
}


def align(matrix, method: str, params: AlignParams = AlignParams()) -> Prediction:
    try:
        fn = ALGORITHMS[method]
    except KeyError:
        raise ValueError(f"unknown alignment method {method!r}; choose from {sorted(ALGORITHMS)}") from None
    return fn(matrix, params)


__all__ = [
    "ALGORITHMS",
    "AlignParams",
    "Prediction",
    "align",
    "align_dp",
    "align_dtw",
    "align_hough",
    "align_tn",
    "import_predictions",
    "write_predictions",
]
