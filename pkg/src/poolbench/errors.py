"""Exception types shared across the package."""


class PoolbenchError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(PoolbenchError):
    """Array shapes do not agree with the operation's contract."""


class IngestError(PoolbenchError):
    """A CSV file cannot be turned into a valid dataset."""


class MissingValues(IngestError):
    """Missing cells encountered and imputation is disabled."""


class ClassTooSmall(PoolbenchError):
    """A class cannot be represented in the train partition."""


class TooFewSamples(PoolbenchError):
    """Fewer samples than folds requested."""


class SingularData(PoolbenchError):
    """A builtin learner cannot fit (empty or degenerate input)."""


class NotFitted(PoolbenchError):
    """predict_proba called before fit."""


class WidthMismatch(PoolbenchError):
    """Query feature width differs from training width."""


class RefitUnsupported(PoolbenchError):
    """Operation requires refitting a predict-only model."""


class SingleClass(PoolbenchError):
    """Metric needs at least two classes present in the labels."""


class NoGroups(PoolbenchError):
    """Worst-group accuracy requested without a group assignment."""


class DegenerateAgreement(PoolbenchError):
    """Cohen's kappa undefined: expected agreement equals 1."""


class DegenerateInput(PoolbenchError):
    """Statistical test input too small or constant."""


class UnsupportedK(PoolbenchError):
    """No critical value embedded for this number of methods."""


class TooFewPairs(PoolbenchError):
    """Wilcoxon needs at least 5 non-zero differences."""


class ZeroVariance(PoolbenchError):
    """Correlation undefined: a coordinate has zero variance."""


class InsufficientOverlap(PoolbenchError):
    """Fewer than two datasets shared by the rankable methods."""


class ConfigError(PoolbenchError):
    """Run configuration fails validation."""


class WorkerError(PoolbenchError):
    """External worker failed, timed out, or broke protocol."""
