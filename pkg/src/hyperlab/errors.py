"""Exception hierarchy. The CLI maps each family to an exit code."""


class HyperlabError(Exception):
    pass


class ValidationError(HyperlabError, ValueError):
    """Bad parameters or config (exit code 2)."""


class Inconclusive(HyperlabError):
    """A check ran but could not reach a verdict (exit code 3)."""


class NumericalFailure(HyperlabError, RuntimeError):
    """A numerical run aborted or a hypothesis check failed (exit code 4)."""


class CFLViolation(NumericalFailure):
    def __init__(self, t, sup_a, dt, limit):
        self.t = t
        self.sup_a = sup_a
        self.dt = dt
        self.limit = limit
        super().__init__(
            f"CFL violated at t={t:.6g}: sup a={sup_a:.6g}, dt={dt:.3g} > limit {limit:.3g}"
        )


class HypothesisViolation(NumericalFailure):
    """A coefficient or symbol broke a standing assumption (e.g. a <= 0)."""


class StepBudgetExceeded(NumericalFailure):
    def __init__(self, reached, budget):
        self.reached = reached
        self.budget = budget
        super().__init__(f"step budget {budget} exhausted at t={reached:.6g}")
