"""Exception types shared across the package."""


class PolytraceError(ValueError):
    """Input or geometry error carrying a short machine-readable ``code``."""

    def __init__(self, code: str, message: str | None = None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class FormatError(PolytraceError):
    """Malformed or unsupported file content."""
