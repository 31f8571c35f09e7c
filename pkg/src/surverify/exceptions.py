"""Exception types raised across the package."""


class InputError(ValueError):
    """Invalid argument, shape, or data content."""


class ResourceError(RuntimeError):
    """A sample source ran out before the requested number of draws.

    ``rounds_completed`` holds how many draws succeeded before exhaustion.
    """

    def __init__(self, message, rounds_completed=None):
        super().__init__(message)
        self.rounds_completed = rounds_completed
