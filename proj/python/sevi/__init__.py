"""Discrete-choice kernels with extreme-value taste shocks."""

from ._core import (
    __version__,
    cv_price,
    cv_removal,
    fit,
    generate,
    invert_shares,
    prob_all,
    prob_levi,
    prob_sevi,
    surplus,
)

__all__ = [
    "__version__",
    "cv_price",
    "cv_removal",
    "fit",
    "generate",
    "invert_shares",
    "prob_all",
    "prob_levi",
    "prob_sevi",
    "surplus",
]
