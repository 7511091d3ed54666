"""Exception types raised across spanlab."""


class SpanlabError(ValueError):
    pass


class MalformedLine(SpanlabError):
    def __init__(self, line_no: int, reason: str = "expected token<TAB>tag"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class UnknownTag(SpanlabError):
    def __init__(self, tag: str, line_no: int | None = None):
        self.tag = tag
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}unknown tag {tag!r}")


class EmptyDataset(SpanlabError):
    pass


class MixedSchemes(SpanlabError):
    pass


class SchemeMismatch(SpanlabError):
    pass


class IllegalTransition(SpanlabError):
    def __init__(self, index: int, tag: str = ""):
        self.index = index
        super().__init__(f"illegal BIO transition at index {index} ({tag})")


class OverlapError(SpanlabError):
    pass


class OutOfRange(SpanlabError):
    pass


class LengthMismatch(SpanlabError):
    def __init__(self, index: int, expected: int | None = None, got: int | None = None):
        self.index = index
        msg = f"sentence {index}: length mismatch"
        if expected is not None:
            msg += f" (gold {expected}, pred {got})"
        super().__init__(msg)


class TooLong(SpanlabError):
    pass


class BadAlpha(SpanlabError):
    pass


class NonFiniteGradient(ArithmeticError):
    pass
