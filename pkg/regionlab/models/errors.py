class RegionLabError(Exception):
    """Base class of every error raised by regionlab"""


class InputShapeError(RegionLabError, ValueError):
    "Raised when an input vector does not match the network input dimension"


class NumericError(RegionLabError, ArithmeticError):
    "Raised when NaN or Inf shows up in the computation"

    def __init__(self, message, layer=None):
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
        self.layer = layer


class NodeIndexError(RegionLabError, IndexError):
    "Raised when a (layer, node) pair does not exist in the network"


class TrainingDivergedError(RegionLabError):
    "Raised when the training loss becomes non-finite"

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch


class DegenerateBatchError(RegionLabError, ValueError):
    "Raised when batch normalization receives fewer than two samples"


class IdxFormatError(RegionLabError, ValueError):
    "Raised when an IDX file has a bad magic number or is truncated"

    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class DatasetMissingError(RegionLabError, FileNotFoundError):
    "Raised when a dataset file or directory cannot be found"


class EmptyClassError(RegionLabError, ValueError):
    "Raised when a class has no sample in a dataset"


class SolverFailureError(RegionLabError):
    """Raised when the simplex solver stalls or cannot certify its optimum.
    Infeasible and unbounded problems are reported through LpStatus instead."""

    def __init__(self, message, constraint=None):
        if constraint is not None:
            message = f"{message} (constraint {constraint})"
        super().__init__(message)
        self.constraint = constraint


class InfeasibleRegionError(RegionLabError):
    "Raised when a halfspace system describes an empty set"


class NullSpaceError(RegionLabError):
    "Raised when no direction orthogonal to the logit gradients can be sampled"


class UnsupportedStyleError(RegionLabError, ValueError):
    "Raised when a render style or image format is unknown"


class PointOutOfBoundsError(RegionLabError, ValueError):
    "Raised when a point lies outside the network input bounds"
