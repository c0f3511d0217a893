"""Exception types shared across the package."""


class DegenerateInput(ValueError):
    """Input point set is too small or geometrically degenerate."""


class ShapeMismatch(ValueError):
    """Vector length does not match the graph or dataset it is paired with."""


class DivergentIntegral(ArithmeticError):
    """Improper integral failed its tail-convergence test."""


class UnsupportedDescriptor(ValueError):
    """Closed-form limit prediction is not available for this configuration."""


class BadConfig(ValueError):
    """Run configuration failed validation."""
