"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the physically meaningful domain of an operation."""


class DegenerateInputError(DomainError):
    """Input is formally valid but carries too little information (e.g. a singular fit)."""


class ConfigError(Exception):
    """A scenario configuration failed to parse or validate.

    ``errors`` holds every violation found, each a human-readable string that
    names the offending field and, where known, its line number.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")
