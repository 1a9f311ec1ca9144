"""Exception types raised across popmatch"""


class PopMatchError(Exception):
    """Base class for every error raised by popmatch"""


class InstanceFormatError(PopMatchError, ValueError):
    """Instance or matching file is malformed or violates a model invariant"""


class FlavorError(PopMatchError, ValueError):
    """Operation is not defined for the scenario flavor or market model given"""


class BudgetExceededError(PopMatchError):
    """Exhaustive enumeration would exceed its configured budget"""

    def __init__(self, what: str, limit: int):
        super().__init__(f"{what} enumeration exceeded budget of {limit}")
        self.what = what
        self.limit = limit


class ConfigError(PopMatchError, ValueError):
    """Environment configuration could not be interpreted"""
