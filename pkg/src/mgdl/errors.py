"""Exception types raised across the package."""


class MgdlError(Exception):
    pass


class DimensionError(MgdlError, ValueError):
    """Array shapes do not conform."""


class DivergenceError(MgdlError, ArithmeticError):
    """Training produced a non-finite loss, gradient or parameter."""


class ConfigError(MgdlError, ValueError):
    """An experiment configuration is malformed or violates an invariant."""


class IdxError(MgdlError, ValueError):
    """Malformed IDX stream."""


class IdxMagicError(IdxError):
    pass


class IdxTypeError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class PpmError(MgdlError, ValueError):
    pass
