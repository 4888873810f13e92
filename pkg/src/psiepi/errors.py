"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`PsiEpiError`,
which is itself a ``ValueError`` so callers that only care about bad input can
catch the builtin.
"""


class PsiEpiError(ValueError):
    pass


class ZeroNorm(PsiEpiError):
    pass


class NonFinite(PsiEpiError):
    pass


class NotNormalized(PsiEpiError):
    pass


class BadDimension(PsiEpiError):
    pass


class DimensionMismatch(PsiEpiError):
    pass


class BadN(PsiEpiError):
    pass


class KeyMismatch(PsiEpiError):
    pass


class DegenerateDenominator(PsiEpiError):
    pass


class EtaOutOfRange(PsiEpiError):
    pass


class NoThreshold(PsiEpiError):
    pass


class NotViolating(PsiEpiError):
    pass


class InvalidScenario(PsiEpiError):
    pass


class InvalidTable(PsiEpiError):
    pass


class EmptySetting(PsiEpiError):
    pass


class LengthMismatch(PsiEpiError):
    pass


class NotADistribution(PsiEpiError):
    pass


class ScenarioFormatError(PsiEpiError):
    """Scenario file is malformed (bad JSON, missing keys, wrong types)."""
