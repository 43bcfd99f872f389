"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition."""


class HintViolation(RuntimeError):
    """A rejection-sampling hint failed to dominate the target distribution."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class EstimationError(RuntimeError):
    """The normalization tester produced no successes."""


class ConstructionError(RuntimeError):
    """Polynomial certification failed after all degree doublings."""

    def __init__(self, message, err_left=float("nan"), sup_all=float("nan"), degree=0):
        super().__init__(message)
        self.err_left = err_left
        self.sup_all = sup_all
        self.degree = degree
