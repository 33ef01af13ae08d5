"""Exception hierarchy.

Every error carries a short machine code so the CLI can serialize failures.
"""


class DiffietyError(Exception):
    code = "error"


class DivisionByZero(DiffietyError, ZeroDivisionError):
    code = "division_by_zero"


class DegenerateImplicitRelation(DiffietyError):
    code = "degenerate_implicit_relation"


class ProbeExhausted(DiffietyError):
    code = "probe_exhausted"


class NotOrthonomic(DiffietyError):
    code = "not_orthonomic"


class InconsistentSystem(DiffietyError):
    code = "inconsistent_system"


class TruncationOverflow(DiffietyError):
    code = "truncation_overflow"


class NoStabilization(DiffietyError):
    code = "no_stabilization"


class NotGoodFiltration(DiffietyError):
    code = "not_good_filtration"


class NoPolynomialTail(DiffietyError):
    code = "no_polynomial_tail"


class NotTooSpecialSuspect(DiffietyError):
    code = "not_too_special_suspect"


class ShapeMismatch(DiffietyError):
    code = "shape_mismatch"


class NotFlat(DiffietyError):
    code = "not_flat"


class UndeclaredSymbol(DiffietyError):
    code = "undeclared_symbol"


class DSLSyntaxError(DiffietyError):
    """Malformed input; ``line`` and ``col`` are 1-based."""

    code = "syntax_error"

    def __init__(self, message, line=0, col=0):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
