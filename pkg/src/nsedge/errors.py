"""Exception types shared across the package."""


class NsedgeError(Exception):
    """Base class for all package-specific errors."""


class NonHermitianError(NsedgeError):
    """Matrix deviates from its conjugate transpose beyond tolerance."""


class NotPSDError(NsedgeError):
    """Matrix has an eigenvalue below the negative PSD tolerance."""


class DimensionMismatchError(NsedgeError):
    """Operator/vector dimensions are inconsistent with the scenario."""


class InvalidStateError(NsedgeError):
    """Density matrix fails positivity or unit-trace requirements."""


class InvalidModelError(NsedgeError):
    """Local-hidden-state model fails its normalization requirements."""


class SignalingDetectedError(NsedgeError):
    """A marginal depends on settings of discarded parties beyond tolerance."""


class CombinatorialOverflowError(NsedgeError):
    """Deterministic-box count exceeds the configured enumeration cap."""


class VectorNotInImageError(NsedgeError):
    """Subtraction vector lies outside the image of some block."""


class NotOnEdgeError(NsedgeError):
    """Operation requires an assemblage with no subtractable LHS part."""


class NonpositiveEpsilonError(NsedgeError):
    """Witness shift must be strictly positive."""


class WrongDimensionError(NsedgeError):
    """Operation is only defined for a specific trusted dimension."""


class NotEntangledError(NsedgeError):
    """State is not entangled across the required cut."""


class PreconditionFailedError(NsedgeError):
    """Input state/measurements fail a construction's rank or entanglement checks."""


class SearchExhaustedError(NsedgeError):
    """Randomized search did not succeed within the configured number of tries."""


class TrivialPOVMError(NsedgeError):
    """POVM element equals 0 or the identity; the spectral split is undefined."""


class InvalidParamsError(NsedgeError):
    """Sampling parameters are out of range."""
