"""Exception types raised across the package."""


class VecGraphError(Exception):
    pass


class DimensionError(VecGraphError, ValueError):
    pass


class StructureError(VecGraphError, ValueError):
    pass


class ContractError(VecGraphError, ValueError):
    pass


class DataError(VecGraphError, ValueError):
    pass


class ParameterError(VecGraphError, ValueError):
    pass


class StateError(VecGraphError, RuntimeError):
    pass


class TrainingDiverged(VecGraphError, RuntimeError):
    """Raised when a non-finite loss shows up during training."""

    def __init__(self, message, epoch, batch, param_norms):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.param_norms = param_norms
