"""Exception types shared across the intopt package."""


class IntOptError(Exception):
    """Base class for all intopt errors."""


class ConfigError(IntOptError):
    """Bad or incomplete pipeline configuration."""


class EmptyInput(IntOptError):
    """An input file or corpus was empty."""


class InvalidIr(IntOptError):
    """The IR verifier rejected a module."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ToolMissing(IntOptError):
    """A required toolchain binary could not be resolved."""


class ToolFailure(IntOptError):
    """A toolchain subprocess exited nonzero."""

    def __init__(self, message: str, stderr: str = "", returncode: int | None = None):
        super().__init__(message)
        self.stderr = stderr
        self.returncode = returncode


class OverCap(IntOptError):
    """A program pair exceeds the configured token cap."""

    def __init__(self, actual: int, cap: int):
        super().__init__(f"token count {actual} exceeds cap {cap}")
        self.actual = actual
        self.cap = cap


class ParseError(IntOptError):
    """Input text did not match the expected format."""


class SourceNotFound(IntOptError):
    """No implementation file matched a pass during dependency extraction."""


class BuildEmpty(IntOptError):
    """Knowledge-base build produced zero entries."""


class EmptyCorpus(IntOptError):
    """Cannot build a retrieval index over an empty knowledge base."""


class BackendUnavailable(IntOptError):
    """The LLM backend could not be reached."""


class RateLimited(BackendUnavailable):
    """The backend kept rate-limiting past the retry budget."""


class ReplayMiss(IntOptError):
    """Replay backend has no transcript for this request."""

    def __init__(self, request_hash: str):
        super().__init__(f"no transcript recorded for request {request_hash}")
        self.request_hash = request_hash


class MalformedStrategy(IntOptError):
    """Model output contained no parseable strategy."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class NoCodeRegion(IntOptError):
    """Model output contained no <code> region."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class SymbolClash(IntOptError):
    """Module merge could not resolve a symbol collision."""


class UnsupportedSignature(IntOptError):
    """Template harness generation only supports all-scalar signatures."""


class BuildFailure(IntOptError):
    """Compiling or linking a fuzzer/benchmark binary failed."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


class TransformFailure(IntOptError):
    """Harness-to-benchmark transformation failed."""


class RunFailure(IntOptError):
    """A benchmark binary exited nonzero or trapped."""

    def __init__(self, message: str, output: str = ""):
        super().__init__(message)
        self.output = output


class KeyMismatch(IntOptError):
    """Records and verdicts are not keyed by the same program ids."""
