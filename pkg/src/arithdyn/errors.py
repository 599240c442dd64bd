"""Exception hierarchy shared by the workbench modules."""


class WorkbenchError(Exception):
    """Base class for every error raised by arithdyn."""


# exactlin
class IntervalSeparationFailure(WorkbenchError):
    """Root enclosures could not be separated within the precision budget."""


class NotEigenpair(WorkbenchError):
    pass


class NotDiagonalizable(WorkbenchError):
    pass


# cones
class ZeroVector(WorkbenchError):
    pass


class DimensionMismatch(WorkbenchError):
    pass


class PreconditionViolated(WorkbenchError):
    pass


class ContradictionDetected(WorkbenchError):
    """A cone criterion produced an outcome its underlying theorem forbids."""


# dynsys
class NotAMorphism(WorkbenchError):
    def __init__(self, factor, message=None):
        self.factor = factor
        super().__init__(message or f"component {factor} has zero resultant")


class DegreeZero(WorkbenchError):
    def __init__(self, factor):
        self.factor = factor
        super().__init__(f"component {factor} has degree 0")


class NotEquivariant(WorkbenchError):
    pass


class BudgetExceeded(WorkbenchError):
    """A digit or iteration budget ran out before the requested depth."""

    def __init__(self, message, best_effort=None):
        super().__init__(message)
        self.best_effort = best_effort


# heights
class NotAnEigenclass(WorkbenchError):
    pass


class DivergenceDetected(WorkbenchError):
    pass


class ThresholdAmbiguous(WorkbenchError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


# atiyah
class CombinatorialBudget(WorkbenchError):
    pass


# cli
class SchemaError(WorkbenchError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f" [field {field}]"
        if line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)


class OracleUnavailable(WorkbenchError):
    pass
