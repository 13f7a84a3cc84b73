"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpecError(ToolkitError):
    """A model / grid / parameter specification violates its invariants."""


class AlignmentError(ToolkitError):
    """A time is not aligned with the simulation grid, or two grids disagree."""


class DivergenceError(ToolkitError):
    """A trajectory produced a non-finite state.

    Carries the index of the first bad step so the failure is attributable.
    """

    def __init__(self, step_index: int, message: str | None = None):
        self.step_index = step_index
        super().__init__(message or f"non-finite state at step index {step_index}")


class NonConvergenceError(ToolkitError):
    """Pullback iteration failed to reach the requested tolerance.

    ``gaps`` holds the sup-norm gap history so the caller can inspect decay.
    """

    def __init__(self, gaps, tol, message: str | None = None):
        self.gaps = list(gaps)
        self.tol = tol
        super().__init__(
            message
            or f"pullback gap {self.gaps[-1] if self.gaps else float('nan'):.3e} "
            f"did not reach tol={tol:.3e} (history of {len(self.gaps)} depths)"
        )


class CapabilityError(ToolkitError):
    """The model lacks an ingredient (Jacobian, diffusion inverse, ...) the
    operation needs, or the operation does not support this dimension."""


class SingularityError(ToolkitError):
    """Evaluation at a point where the quantity is not defined (e.g. the
    Hessian of |x|^p at the origin for p < 2)."""


class SchemaError(ToolkitError):
    """A CSV/file does not match the expected schema."""


class ConfigError(ToolkitError):
    """Configuration file validation failure; message lists offending keys."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))
