"""Exception types shared across the pipeline."""


class PRNetError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PRNetError, ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DatasetError(PRNetError, ValueError):
    """Empty datasets, duplicated samples, single-class labels, bad splits."""


class ShapeError(PRNetError, ValueError):
    pass


class CoverageError(PRNetError, ValueError):
    """A locus or gene is not covered by the universe / hierarchy it must live in."""

    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        super().__init__(message)


class ConstraintViolation(PRNetError, ValueError):
    """Incoming data does not contain every locus the model was built on."""

    def __init__(self, missing, message=None):
        self.missing = list(missing)
        if message is None:
            shown = ", ".join(str(m) for m in self.missing[:10])
            more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
            message = f"{len(self.missing)} required loci missing: {shown}{more}"
        super().__init__(message)


class HierarchyError(PRNetError, ValueError):
    pass


class DivergenceError(PRNetError, RuntimeError):
    def __init__(self, message, epoch=None, learning_rate=None):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(message)


class NoSignalError(PRNetError, ValueError):
    pass


class UndefinedMetricError(PRNetError, ValueError):
    pass
