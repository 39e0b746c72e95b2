"""Exception types shared across the simulator."""


class UnitError(ValueError):
    """Unknown unit name or dimensionally incompatible conversion."""


class ConfigError(ValueError):
    """Scenario configuration violates the schema.

    The message carries the dotted path of the offending field.
    """


class GridError(ValueError):
    """Grid misuse: wraparound risk, probe outside the domain, grid mismatch."""


class StabilityError(RuntimeError):
    """The explicit solver detected a runaway solution and aborted."""


class InvariantError(RuntimeError):
    """A state trajectory left its admissible region (usually a step-size issue)."""
