class ChainexError(Exception):
    """Base class for all errors raised by chainex."""


class InputError(ChainexError, ValueError):
    pass


class ParseError(ChainexError, ValueError):
    """Malformed instance or solution text.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class GenerationError(ChainexError, ValueError):
    pass


class BuildError(ChainexError, ValueError):
    pass


class ExportError(ChainexError, ValueError):
    pass


class ConfigError(ChainexError, ValueError):
    pass


class OracleError(ChainexError, ValueError):
    pass


class DecompositionError(ChainexError, ValueError):
    pass
