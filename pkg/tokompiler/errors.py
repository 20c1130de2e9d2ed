"""Named failures raised across the tokenizer.

Each error keeps a builtin base so callers that only know the builtin
(``ValueError``, ``KeyError`` ...) still catch it.
"""


class TokompilerError(Exception):
    pass


class UnsupportedLanguage(TokompilerError, ValueError):
    pass


class EmptySourceUnit(TokompilerError, ValueError):
    pass


class CatastrophicParseFailure(TokompilerError, RuntimeError):
    """The parser produced no tree at all."""


class EmptyRange(TokompilerError, ValueError):
    pass


class OverlappingSpans(TokompilerError, ValueError):
    pass


class UnknownReplacementToken(TokompilerError, KeyError):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token

    def __str__(self) -> str:
        return f"No dictionary entry for replacement token '{self.token}'"


class IdOutOfRange(TokompilerError, IndexError):
    pass


class EmptyCorpus(TokompilerError, ValueError):
    pass


class MalformedVocabFile(TokompilerError, ValueError):
    pass


class MalformedModelFile(TokompilerError, ValueError):
    pass


class RootNotFound(TokompilerError, FileNotFoundError):
    pass


class ZeroNormalizer(TokompilerError, ZeroDivisionError):
    pass


class ConfigError(TokompilerError, ValueError):
    pass
