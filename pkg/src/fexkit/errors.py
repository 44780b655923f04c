"""Exception hierarchy.

Every error carries a short machine-readable ``code`` which the CLI prints as
``error: <code>: <message>``.
"""


class FexError(Exception):
    """Base class for all data/validation errors raised by fexkit."""

    code = "FexError"


class MissingColumn(FexError):
    code = "MissingColumn"

    def __init__(self, name):
        super().__init__(f"missing column {name!r}")
        self.name = name


class DuplicateColumn(FexError):
    code = "DuplicateColumn"

    def __init__(self, name):
        super().__init__(f"duplicate column {name!r}")
        self.name = name


class MalformedNumber(FexError):
    code = "MalformedNumber"

    def __init__(self, row, col, text=""):
        super().__init__(f"malformed number {text!r} at data row {row}, column {col!r}")
        self.row = row
        self.col = col


class IoFailure(FexError):
    code = "IoFailure"


class InvalidTable(FexError):
    code = "InvalidTable"


class DegenerateFace(FexError):
    code = "DegenerateFace"


class DegenerateHull(FexError):
    code = "DegenerateHull"


class BadDimensions(FexError):
    code = "BadDimensions"


class MaskShapeMismatch(FexError):
    code = "MaskShapeMismatch"


class DimensionMismatch(FexError):
    code = "DimensionMismatch"


class RankZero(FexError):
    code = "RankZero"


class RankDeficient(FexError):
    code = "RankDeficient"


class RankDeficientDesign(FexError):
    code = "RankDeficientDesign"


class EmptySession(FexError):
    code = "EmptySession"


class BadBand(FexError):
    code = "BadBand"


class SingleClass(FexError):
    code = "SingleClass"


class NonFinite(FexError):
    code = "NonFinite"


class TooFewSamples(FexError):
    code = "TooFewSamples"


class SingleGroup(FexError):
    code = "SingleGroup"


class ZeroVariance(FexError):
    code = "ZeroVariance"


class LengthMismatch(FexError):
    code = "LengthMismatch"


class EmptyRow(FexError):
    code = "EmptyRow"


class ModelConfigMismatch(FexError):
    code = "ModelConfigMismatch"


class ModelFormatError(FexError):
    code = "ModelFormatError"
