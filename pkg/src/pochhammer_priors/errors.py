"""Exception types raised across the package."""


class PochhammerError(ValueError):
    """Base class for invalid-input errors in this package."""


class IntegrabilityError(PochhammerError):
    """The rational density is not integrable on (0, inf)."""


class PoleCollisionError(PochhammerError):
    """Two pole families coincide and leave a multiple pole the caller cannot handle."""


class MomentError(PochhammerError):
    """The requested moment does not exist for these parameters."""


class SizeBudgetError(PochhammerError):
    """The residue expansion would exceed the configured size budget."""
