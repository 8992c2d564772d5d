"""Exception types shared across the package."""


class TesimError(Exception):
    pass


class ParameterError(TesimError, ValueError):
    """Invalid model or configuration parameters.

    ``problems`` is a list of ``(field_path, rule)`` pairs, all of them, not
    just the first one found.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("", problems)]
        self.problems = list(problems)
        super().__init__("; ".join(f"{k}: {v}" if k else v for k, v in self.problems))


class DomainError(TesimError, ValueError):
    pass


class GridMismatch(TesimError, ValueError):
    pass


class NumericalFailure(TesimError):
    """Base for solver failures (exit code 3 at the CLI)."""

    step = None
    time = None

    def at(self, step, time):
        self.step, self.time = step, time
        return self

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg += f" (step {self.step}, t={self.time:.6g})"
        return msg


class NewtonDivergence(NumericalFailure):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Newton did not converge in {iterations} iterations, "
                         f"last residual {residual:.3e}")


class PositivityLoss(NumericalFailure):
    pass


class PicardDivergence(NumericalFailure):
    def __init__(self, gap, iterations):
        self.gap = gap
        self.iterations = iterations
        super().__init__(f"Picard coupling did not converge in {iterations} iterations, "
                         f"last temperature gap {gap:.3e}")


class NonFiniteState(NumericalFailure):
    pass
