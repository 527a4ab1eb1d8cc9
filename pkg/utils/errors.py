"""Error hierarchy shared by every module.

Each class carries the CLI exit code used when it escapes to the top level.
"""


class LinfError(Exception):
    """Base class for all library errors"""

    exit_code = 1


class ConfigError(LinfError):
    """Bad config file, unknown key or bad flag value"""

    exit_code = 2


class ParameterError(LinfError):
    """Operation parameter outside its documented range"""

    exit_code = 2


class InvalidRangeError(ParameterError):
    """Empty or inverted numeric range (lo > hi)"""


class ShapeError(LinfError):
    """Tensor shapes or widths do not line up"""


class NumericError(LinfError):
    """Non-finite value where a finite one is required"""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class LabelError(LinfError):
    """Class label outside [0, k)"""


class DataError(LinfError):
    """Dataset could not be read or is unusable"""

    exit_code = 3


class FormatError(DataError):
    """Wrong magic number in a binary file"""


class TruncationError(DataError):
    """Binary payload shorter than its header promises"""


class ConsistencyError(DataError):
    """Two files (or two header fields) disagree"""


class CapacityError(ParameterError):
    """Requested more classes than the construction can place"""


class UndefinedGapError(DataError):
    """Class gap asked for a dataset with fewer than two classes"""


class ModelFileError(LinfError):
    """Model or ensemble file failed to parse"""

    exit_code = 5


class ModelFormatError(ModelFileError):
    """Model file does not start with the expected magic"""


class ModelTruncationError(ModelFileError):
    """Model file ends before its payload does"""


class ChecksumError(ModelFileError):
    """CRC-32 trailer does not match the content"""


class CertificationRefusedError(LinfError):
    """Model contains a surrogate layer and cannot be certified"""

    exit_code = 6

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


class UnsupportedModeError(LinfError):
    """Operation not defined for this ensemble combination mode"""


class TrainingDivergenceError(LinfError):
    """Training produced a non-finite loss"""

    exit_code = 4

    def __init__(self, message, last_good_epoch):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch


class EnsembleTrainingError(TrainingDivergenceError):
    """A base network failed to train"""

    def __init__(self, message, base_index, last_good_epoch):
        super().__init__(message, last_good_epoch)
        self.base_index = base_index


class DegenerateInputError(ParameterError):
    """Input sits on (or too close to) a non-differentiable point"""
