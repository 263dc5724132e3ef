"""Exception types shared across the pipeline."""


class DataError(Exception):
    """Unusable input data (unreadable file, corrupt store, bad config value)."""


class StoreCorruptError(DataError):
    def __init__(self, path, detail: str):
        super().__init__(f"corrupt bar file {path}: {detail}")
        self.path = path
        self.detail = detail


class SymbolMapCycleError(DataError):
    """Symbol rename chain loops back on itself."""


class ConfigError(Exception):
    """Bad key/value in a config file; carries file/line context when known."""


class SingleClassError(ValueError):
    """Training labels contain only one class; nothing to fit."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or activations."""
