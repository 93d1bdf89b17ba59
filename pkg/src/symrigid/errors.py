"""Exception types shared across modules.

Everything raised on purpose derives from :class:`SymrigidError`, so callers
(the CLI in particular) can separate domain refusals from programming errors.
"""


class SymrigidError(Exception):
    """Base class for domain errors."""


class SliceConstructionFailed(SymrigidError):
    """The span of the Hamiltonian fields at the point is not isotropic."""


class Inconclusive(SymrigidError):
    """Every random combination produced a clustered spectrum."""


class ClassificationAmbiguous(SymrigidError):
    """An eigenvalue is within tolerance of both axes (or counts do not add up)."""


class NotElliptic(SymrigidError):
    pass


class NotFixedPoint(SymrigidError):
    pass


class NonInvertibleJacobian(SymrigidError):
    def __init__(self, message: str, where=None):
        super().__init__(message)
        self.where = where


class ActionAxiomViolated(SymrigidError):
    pass


class CloudTooSpread(SymrigidError):
    """Circular mean undefined: the averaged points do not fit in an open half circle."""


class NotClose(SymrigidError):
    """Two actions are further apart than the closeness gate allows."""


class HypothesisViolated(SymrigidError):
    pass


class NonCompactLevel(SymrigidError):
    pass


class CriticalLevel(SymrigidError):
    pass


class NotInvariant(SymrigidError):
    pass


class NotReducible(SymrigidError):
    pass
