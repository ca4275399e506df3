"""Exception hierarchy shared by every module.

All errors derive from :class:`AuditError` (itself a ``ValueError``) so callers
such as the CLI can map any data problem to a single exit code.
"""


class AuditError(ValueError):
    """Base class for data and contract violations."""


class NegativeMass(AuditError):
    pass


class NotNormalized(AuditError):
    def __init__(self, total: float, what: str = "distribution"):
        self.total = total
        super().__init__(f"{what} sums to {total!r}, expected 1 within 1e-9")


class MassNotNormalized(NotNormalized):
    def __init__(self, total: float):
        super().__init__(total, what="population mass")


class SupportMismatch(AuditError):
    pass


class LengthMismatch(AuditError):
    pass


class EmptyGroup(AuditError):
    def __init__(self, group: int):
        self.group = group
        super().__init__(f"group {group} has no rows/mass")


class EmptyCell(AuditError):
    def __init__(self, group: int, label: int):
        self.group = group
        self.label = label
        super().__init__(f"no rows with group={group}, label={label}")


class InvalidBinCount(AuditError):
    pass


class UndefinedOnSupport(AuditError):
    pass


class TooLarge(AuditError):
    def __init__(self, n: int, limit: int):
        self.n = n
        self.limit = limit
        super().__init__(f"population has n={n} x-values; enumeration limit is {limit}")


class DimensionMismatch(AuditError):
    pass


class EmptyBatch(AuditError):
    pass


class NonFiniteLoss(AuditError):
    pass


class Diverged(NonFiniteLoss):
    pass


class MissingColumn(AuditError):
    pass


class UnparseableRow(AuditError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class EmptyAfterFiltering(AuditError):
    pass


class BadFormat(AuditError):
    pass


class IndexOutOfRange(BadFormat):
    pass
