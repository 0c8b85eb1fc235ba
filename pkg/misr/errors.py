# misr/errors.py


class MisrError(Exception):
    """Root of every error raised by the toolkit."""


class DecodeError(MisrError, ValueError):
    pass


class BoundsError(MisrError, ValueError):
    pass


class DimensionError(MisrError, ValueError):
    pass


class RangeError(MisrError, ValueError):
    """Intensity outside [0, 1] or not finite."""


class EmptyClearError(MisrError, ValueError):
    """No clear pixel left to score or to train on."""


class MetricDomainError(MisrError, ValueError):
    pass


class StructuralError(MisrError, ValueError):
    """Inputs have the wrong shape or count, as opposed to failing a data-quality rule."""


class ConfigError(MisrError, ValueError):
    pass


class GenerationError(MisrError, RuntimeError):
    pass


class ShapeError(MisrError, ValueError):
    pass


class TrainingDivergenceError(MisrError, RuntimeError):
    def __init__(self, epoch: int, detail: str = "non-finite loss"):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


class ParamFormatError(MisrError, ValueError):
    pass


class ParamShapeError(ParamFormatError):
    pass
