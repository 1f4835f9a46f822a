"""Exception hierarchy shared by all modules."""


class QmimoError(Exception):
    pass


class InvalidParameterError(QmimoError, ValueError):
    pass


class InvalidStateError(QmimoError):
    pass


class CalibrationError(QmimoError):
    """No backoff on the search grid satisfies the deviation criterion."""

    def __init__(self, b: int, best_deviation_db: float, criterion_db: float):
        self.b = b
        self.best_deviation_db = best_deviation_db
        self.criterion_db = criterion_db
        super().__init__(
            f"calibration failed for b={b}: best deviation {best_deviation_db:.2f} dB "
            f"does not reach criterion {criterion_db:.2f} dB"
        )


class ParseError(QmimoError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SingularChannelError(QmimoError, ArithmeticError):
    pass


class SimulationError(QmimoError):
    pass


class CalibrationMismatchWarning(UserWarning):
    pass
