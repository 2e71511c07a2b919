class ConfigError(ValueError):
    """Invalid configuration; ``path`` is a JSON pointer to the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path or "/"
        self.message = message
        super().__init__(f"{self.path}: {message}")

    def under(self, prefix: str) -> "ConfigError":
        """Same error re-rooted below ``prefix``."""
        inner = "" if self.path == "/" else self.path
        return ConfigError(prefix + inner, self.message)


class ConvergenceError(ArithmeticError):
    pass
