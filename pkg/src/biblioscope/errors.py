"""Exception types shared across the package."""


class BiblioscopeError(Exception):
    """Base class for all package errors."""


class ConfigError(BiblioscopeError):
    """Invalid pipeline configuration (bad value, unknown key, bad query)."""


class InputError(BiblioscopeError):
    """An input file is missing, unreadable, or structurally invalid."""


class QueryParseError(ConfigError):
    """Topical query text failed to parse.

    Carries the character offset of the offending construct in ``position``.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class GlossaryError(InputError):
    """SDG glossary file is invalid."""


class StageError(BiblioscopeError):
    """A pipeline stage failed; names the stage and the cause."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


class MissingStageError(StageError):
    """A stage was invoked before the stage that produces its inputs."""

    def __init__(self, stage: str, required: str):
        super().__init__(
            stage, f"missing upstream artifacts; run the '{required}' stage first"
        )
        self.required = required
