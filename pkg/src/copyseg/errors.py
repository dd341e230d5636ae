"""Exception hierarchy shared by the library and the command line."""


class CopysegError(Exception):
    """Base class for every error raised by copyseg."""


class ConfigError(CopysegError):
    """Invalid parameters, flags or configuration files."""


class DataError(CopysegError):
    """Input data that cannot be parsed or violates an invariant."""
