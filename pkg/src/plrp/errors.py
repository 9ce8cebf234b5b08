"""Exception types shared across the package."""


class PlrpError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(PlrpError, ValueError):
    """Tensor shapes are inconsistent with a layer or model contract."""


class InvalidModelError(PlrpError, ValueError):
    """A model violates a structural invariant (shape chain, last layer, ...)."""


class ModelFormatError(PlrpError, ValueError):
    """A serialized model/trace/config file is malformed."""


class NumericalError(PlrpError, ArithmeticError):
    """A computation produced non-finite values."""


class TrainingDivergedError(NumericalError):
    """Training loss became non-finite."""


class ZeroDenominatorError(NumericalError):
    """A relevance column has zero net input but nonzero relevance to deliver."""


class EmptySupportError(PlrpError, ValueError):
    """Mass rescaling was asked to conserve mass onto an empty support."""


class DataError(PlrpError, ValueError):
    """A dataset file or directory is missing or malformed."""
