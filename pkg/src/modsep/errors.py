"""Shared exception types."""


class ModsepError(Exception):
    """Base class for all library errors."""


class ParseError(ModsepError):
    """Input text does not conform to a grammar; carries a position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class FormulaError(ModsepError):
    """Ill-formed formula (unbound variable, non-monotone occurrence, ...)."""


class UnsupportedAlternationError(ModsepError):
    """Fixpoint alternation beyond the implemented dealternation stage."""


class UnsupportedClassError(ModsepError):
    """Model class / operation combination that is not supported."""


class BudgetExhaustedError(ModsepError):
    """An enumeration or search hit its budget before reaching an answer."""
