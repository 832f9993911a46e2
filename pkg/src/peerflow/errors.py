"""Exception hierarchy. The CLI maps these onto exit codes."""


class PeerflowError(Exception):
    """Base class for all library errors."""


class DegenerateTiersError(PeerflowError):
    """Both tiers deliver the same gain, so the paid/free boundary is undefined."""


class BracketError(PeerflowError):
    """A monotone root-finding bracket shows no sign change."""


class UnreachableShareError(PeerflowError):
    """The paid tier cannot absorb the requested capacity share at this price."""


class PaidTierInfeasibleError(PeerflowError):
    """Pure paid peering with no CP able to afford the paid price."""


class DomainError(PeerflowError):
    """Input outside the region where a formula is defined."""


class NonConvergenceError(PeerflowError):
    """An iterative method hit its iteration cap."""


class PreconditionError(PeerflowError):
    """A theorem's premise does not hold for the requested evaluation."""


class InfeasibleError(PeerflowError):
    """No point in the search region satisfies the constraints."""


class ConfigError(PeerflowError):
    """Malformed run configuration."""
