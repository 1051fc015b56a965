"""Exception hierarchy shared across the package."""


class WteError(Exception):
    """Base class for every error raised by this package."""


class ParseError(WteError):
    """A file could not be parsed under the declared format."""

    def __init__(self, message, *, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(WteError):
    """A domain object violates one of its invariants."""


class DimensionMismatchError(WteError):
    """Two objects that must share an ambient dimension do not."""


class InvalidDissimilarityError(WteError):
    """A dissimilarity matrix has a negative entry or a nonzero diagonal."""


class DegenerateInputError(WteError):
    """Input is degenerate for the requested operation (e.g. all-zero dissimilarities)."""


class DegeneratePlanError(WteError):
    """A transport plan has a zero-mass row and cannot be projected."""


class NotPsdError(WteError):
    """A matrix required to be positive semidefinite has a negative eigenvalue."""

    def __init__(self, message, *, eigenvalue=None):
        self.eigenvalue = eigenvalue
        if eigenvalue is not None:
            message = f"{message} (offending eigenvalue {eigenvalue:.6e})"
        super().__init__(message)


class SolverFailureError(WteError):
    """An iterative solver hit its iteration cap without converging."""

    def __init__(self, message, *, residual=None, pivots=None):
        self.residual = residual
        self.pivots = pivots
        detail = []
        if residual is not None:
            detail.append(f"residual {residual:.6e}")
        if pivots is not None:
            detail.append(f"pivots {pivots}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


class UnknownLabelError(WteError):
    """A (dataset, label) pair is missing from the label atlas."""


class IncompatibleEmbeddingError(WteError):
    """Embeddings built against different references were compared."""


class PersistenceError(WteError):
    """A binary artifact file has a bad magic number, version, or payload."""


class PipelineError(WteError):
    """A CLI pipeline stage failed; carries the stage name and offending input."""

    def __init__(self, stage, message, *, source=None):
        self.stage = stage
        self.source = source
        prefix = f"[stage={stage}" + (f" input={source}" if source else "") + "]"
        super().__init__(f"{prefix} {message}")
