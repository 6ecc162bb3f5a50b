"""Exception types shared across the toolkit."""


class MslevyError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(MslevyError):
    """Invalid argument, config file, or stepper setup (CLI exit code 2)."""


class BlowUpError(MslevyError):
    """A simulated path left the finite range; the whole batch is invalid.

    Attributes:
        time: simulation time at which the first non-finite state appeared.
        paths: indices of the offending paths within the batch.
    """

    def __init__(self, time, paths):
        self.time = float(time)
        self.paths = list(paths)
        super().__init__(
            f"path blow-up at t={self.time:.6g} on {len(self.paths)} path(s) "
            f"(first index {self.paths[0] if self.paths else '?'})"
        )


class TableValidationError(MslevyError):
    """Averaged-coefficient table failed leave-node-out validation."""


class DecayFitError(MslevyError):
    """Fitted ergodicity decay rate is not positive; truncated time
    integrals are not demonstrably convergent at this budget."""


class NoiseDominatedError(MslevyError):
    """Monte Carlo noise exceeds the signal; the estimate is withheld."""
