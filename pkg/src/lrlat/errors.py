"""Exception types shared across the package."""


class LrlatError(Exception):
    """Base class for all errors raised by lrlat."""


class DomainError(LrlatError, ValueError):
    """An argument lies outside the domain of an operation (bad site, torus mismatch, ...)."""


class SingularModeError(DomainError):
    """The dispersion vanishes at k=0 (omega=0), so gamma^-1 is undefined."""


class ConfigError(LrlatError, ValueError):
    """Invalid configuration. ``violations`` lists every problem found, not just the first."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class WraparoundError(ConfigError):
    """A scan or region would feel the periodic images of the torus."""


class FitError(LrlatError, RuntimeError):
    """A fit was requested on data that cannot support it."""
