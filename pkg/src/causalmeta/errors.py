"""Exception hierarchy.

Everything raised because of bad input data or bad configuration derives from
``MetaAnalysisError``; the CLI maps those to exit code 2.
"""


class MetaAnalysisError(ValueError):
    pass


class ValidationError(MetaAnalysisError):
    pass


class EmptyDataset(ValidationError):
    pass


class EmptyArm(ValidationError):
    pass


class NegativeCount(ValidationError):
    pass


class NonIntegerCount(ValidationError):
    pass


class DuplicateLabel(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = path
        if line is not None:
            where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ZeroCellUnresolvable(MetaAnalysisError):
    pass


class DegenerateStudy(MetaAnalysisError):
    pass


class MixedMeasures(MetaAnalysisError):
    pass


class WeightLengthMismatch(MetaAnalysisError):
    pass


class InvalidWeights(MetaAnalysisError):
    pass


class DomainError(MetaAnalysisError):
    pass


class VarianceUnavailable(MetaAnalysisError):
    pass


class DegenerateEquation(MetaAnalysisError):
    pass


class DegenerateDraw(MetaAnalysisError):
    pass


class NoValidDatasets(MetaAnalysisError):
    pass


class ConfigError(MetaAnalysisError):
    pass
