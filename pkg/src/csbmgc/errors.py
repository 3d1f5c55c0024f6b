"""Exception types shared across the package.

Validation problems (bad parameters, malformed files, impossible masks) are
``ValueError`` subclasses; numerical breakdowns (non-finite losses, a linear
program that trips its cycling guard) are ``RuntimeError`` subclasses.  The
command line maps the first family to exit code 2 and the second to 3.
"""

from __future__ import annotations


class ParameterError(ValueError):
    """A model or configuration parameter is outside its admissible range."""


class ShapeError(ValueError):
    """An array has the wrong shape, symmetry, or value set."""


class MaskError(ValueError):
    """A label mask request cannot be satisfied (e.g. more labels than nodes)."""


class DataError(ValueError):
    """An on-disk dataset is malformed; the message names the file and line."""


class EstimationError(ValueError):
    """A statistic cannot be estimated from the data provided."""


class DegenerateMeansError(ValueError):
    """The two class means coincide, so a mean-difference direction is undefined."""


class NumericalError(RuntimeError):
    """A numerical procedure produced a non-finite value.

    Attributes
    ----------
    iteration:
        Index of the iteration at which the problem was detected, when known.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class SimplexError(RuntimeError):
    """The LP solver gave up (cycling guard exceeded or inconsistent state)."""
