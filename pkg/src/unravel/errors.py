"""Exception hierarchy shared by all unravel modules."""

from __future__ import annotations


class UnravelError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(UnravelError, ValueError):
    pass


class NonHermitianInteraction(UnravelError, ValueError):
    """Interaction matrix fails the Hermiticity check.

    ``row``/``col`` locate the worst offending pair and ``residual`` is
    ``|h[row, col] - conj(h[col, row])|``.
    """

    def __init__(self, row: int, col: int, residual: float, scale: float):
        self.row = row
        self.col = col
        self.residual = residual
        self.scale = scale
        super().__init__(
            f"interaction is not Hermitian: |h[{row}][{col}] - conj(h[{col}][{row}])| "
            f"= {residual:.3e} (max |h| = {scale:.3e})"
        )


class NonPositiveHbar(UnravelError, ValueError):
    pass


class InvalidDensityMatrix(UnravelError, ValueError):
    pass


class NonHermitianObservable(UnravelError, ValueError):
    pass


class AllZeroAmplitudes(UnravelError, ValueError):
    pass


class InvalidInitialSpec(UnravelError, ValueError):
    pass


class EmptyEnsemble(UnravelError, ValueError):
    pass


class GridMismatch(UnravelError, ValueError):
    pass


class MixedTimes(UnravelError, ValueError):
    pass


class InsufficientSamples(UnravelError, ValueError):
    pass


class MetadataMismatch(UnravelError, ValueError):
    pass


class EigenFailure(UnravelError, RuntimeError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"eigendecomposition failed, residual {residual:.3e}")


class ConfigError(UnravelError, ValueError):
    """Bad run configuration or model file; the CLI maps it to exit code 1."""
