class NoPathError(RuntimeError):
    """Start and goal are not connected through free cells."""


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class PredictorUnavailableError(RuntimeError):
    """The external trend predictor did not respond in time."""
