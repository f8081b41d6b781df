"""Exception types shared across the toolkit."""


class InputError(ValueError):
    """Invalid parameter or observation."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class ContractError(RuntimeError):
    """A caller broke a stepping contract (e.g. supplied an observation the
    detector did not ask for)."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate could not be formed."""


class CalibrationError(RuntimeError):
    """Threshold calibration could not bracket the target."""
