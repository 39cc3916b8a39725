"""Exception types shared across the package."""


class QnrouteError(Exception):
    """Base class for all package errors."""


class InvalidCapacityError(QnrouteError):
    """The address space cannot host the requested clusters."""


class UnassignedAddressError(QnrouteError):
    """Address lies in an unused region of the address space."""


class PrefixRangeError(QnrouteError):
    """Requested prefix length exceeds the address width."""


class GenerationFailedError(QnrouteError):
    """Graph generator failed to produce a connected graph."""


class UnreachableError(QnrouteError):
    """No path exists between the requested endpoints."""


class NeighborhoodSizeError(QnrouteError):
    """Requested e-neighborhood size is not smaller than the node count."""


class ChainViolationError(QnrouteError):
    """An inequality in the stretch-bound derivation failed on a concrete path.

    Carries the evaluated trace so callers can inspect which step broke.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DepletedLinkError(QnrouteError):
    """A path segment has no entangled pairs left to consume."""


class DimensionCapError(QnrouteError):
    """The joint statevector would exceed the configured qubit cap."""


class PartitionCountError(QnrouteError):
    """More partitions requested than there are members to split."""


class ConfigError(QnrouteError):
    """Experiment configuration is invalid; message names the offending field."""


class MismatchedSeedsError(QnrouteError):
    """Paired comparison requires both configurations to share seeds."""
