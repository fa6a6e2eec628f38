"""Exception hierarchy shared by all ncbloch modules."""


class BlochError(Exception):
    """Base class for every error raised by ncbloch."""


# -- groups -----------------------------------------------------------------

class GroupError(BlochError, ValueError):
    pass


class NotLatinSquare(GroupError):
    pass


class NoIdentity(GroupError):
    pass


class NoInverse(GroupError):
    pass


class NotAssociative(GroupError):
    pass


class RepresentationError(BlochError, ValueError):
    pass


class NotUnitary(RepresentationError):
    pass


class NotHomomorphism(RepresentationError):
    pass


class NotIrreducible(RepresentationError):
    pass


class EquivalentPair(RepresentationError):
    def __init__(self, a: int, b: int, overlap: float):
        super().__init__(f"irreps {a} and {b} are equivalent (character overlap {overlap:.3g})")
        self.a = a
        self.b = b


class IncompleteSet(RepresentationError):
    pass


class DimensionMismatch(BlochError, ValueError):
    pass


# -- covering models ---------------------------------------------------------

class ModelError(BlochError, ValueError):
    pass


class CocycleViolation(ModelError):
    pass


class DisconnectedCover(ModelError):
    pass


# -- decomposition -----------------------------------------------------------

class IncompleteDual(BlochError, ValueError):
    pass


class NonPositiveTime(BlochError, ValueError):
    pass


class SpectralParameterInSpectrum(BlochError, ValueError):
    pass


class InvalidSpectralParameter(BlochError, ValueError):
    pass


# -- torus / special functions -----------------------------------------------

class DomainExceeded(BlochError, ValueError):
    pass


class PoleProximity(BlochError, ValueError):
    pass


class QuadratureNotConverged(BlochError, RuntimeError):
    pass


class TruncationNotConverged(BlochError, RuntimeError):
    pass


class GridTooCoarse(BlochError, ValueError):
    pass


# -- cli ---------------------------------------------------------------------

class ConfigInvalid(BlochError, ValueError):
    pass


class ModelLoadError(BlochError, ValueError):
    pass
