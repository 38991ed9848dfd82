"""Exception types shared across the package."""


class HorolabError(Exception):
    """Base class."""


class NearSingular(HorolabError):
    pass


class DomainError(HorolabError):
    pass


class NotDecomposable(HorolabError):
    pass


class NotHyperbolic(HorolabError):
    pass


class NonPositiveDegree(HorolabError):
    pass


class BudgetExceeded(HorolabError):
    pass


class BudgetBlowup(BudgetExceeded):
    pass


class BudgetMismatch(HorolabError):
    pass


class DegenerateTwist(HorolabError):
    pass


class ConfigurationInvalid(HorolabError):
    pass


class NegativeSlack(ConfigurationInvalid):
    pass


class DanglingEdge(HorolabError):
    pass


class InvalidModel(HorolabError):
    pass


class NotLipschitz(HorolabError):
    pass


class ValidationFailure(HorolabError):
    pass
