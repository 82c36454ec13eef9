class OuterPPOError(Exception):
    pass


class ConfigError(OuterPPOError, ValueError):
    """Invalid configuration; raised before any work starts."""


class NumericalError(OuterPPOError, ArithmeticError):
    """A NaN or infinity reached the parameters, losses or policy outputs."""


class CheckpointFormatError(OuterPPOError, ValueError):
    pass
