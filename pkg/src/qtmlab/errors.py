"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


class VoteBoxError(ValueError):
    """A vote vector lies outside the admissible box."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its iteration budget."""
