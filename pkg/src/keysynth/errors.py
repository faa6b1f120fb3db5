"""Exception hierarchy shared by every keysynth module."""


class KeysynthError(Exception):
    """Base class for all library errors."""


class SequenceTooShort(KeysynthError, ValueError):
    pass


class MalformedSequence(KeysynthError, ValueError):
    pass


class NonCausalSequence(KeysynthError, ValueError):
    """Reconstructed press times are not strictly increasing; resample and retry."""


class InvalidKeyCode(KeysynthError, ValueError):
    pass


class EmptyTrainingSet(KeysynthError, ValueError):
    pass


class InvalidBandwidth(EmptyTrainingSet):
    pass


class SamplingExhausted(KeysynthError, RuntimeError):
    pass


class ShapeError(KeysynthError, ValueError):
    pass


class NumericalError(KeysynthError, FloatingPointError):
    pass


class InvalidParameters(KeysynthError, ValueError):
    pass


class TrainingDiverged(NumericalError):
    pass


class EmptyClass(KeysynthError, ValueError):
    pass


class ProtocolViolation(KeysynthError, ValueError):
    pass


class EmptyEvalSet(KeysynthError, ValueError):
    pass


class EmptyCorpus(KeysynthError, ValueError):
    pass


class InsufficientData(KeysynthError, ValueError):
    pass


class CorpusIOError(KeysynthError, OSError):
    pass


class ModelFormatError(KeysynthError, ValueError):
    pass
