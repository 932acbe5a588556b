"""Exception types shared across the package."""


class ProtocolOrderError(RuntimeError):
    """A classical message or decoding step happened out of protocol order."""
