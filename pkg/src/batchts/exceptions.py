"""Exception types shared across the package."""


class UsageError(ValueError):
    """A caller passed arguments that violate an operation's preconditions."""


class InputError(RuntimeError):
    """External input (a file, a config) could not be turned into a valid object."""
