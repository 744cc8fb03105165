"""Exception hierarchy shared by every stage of the pipeline."""


class EcgMaeError(Exception):
    """Base class; the CLI prints ``error[<ClassName>]: <message>``."""


# ingestion
class MalformedHeader(EcgMaeError, ValueError):
    pass


class UnsupportedFormat(EcgMaeError, ValueError):
    pass


class TruncatedData(EcgMaeError, ValueError):
    pass


class InvalidGain(EcgMaeError, ValueError):
    pass


class MalformedAnnotation(EcgMaeError, ValueError):
    pass


class LengthMismatch(EcgMaeError, ValueError):
    pass


# preprocessing
class EmptySignal(EcgMaeError, ValueError):
    pass


class SignalTooShort(EcgMaeError, ValueError):
    pass


class NonFiniteInput(EcgMaeError, ValueError):
    pass


class UnknownRecord(EcgMaeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidConfig(EcgMaeError, ValueError):
    pass


# numerics / models
class ShapeMismatch(EcgMaeError, ValueError):
    pass


class InvalidTarget(EcgMaeError, ValueError):
    pass


class EmptyMask(EcgMaeError, ValueError):
    pass


# training / evaluation
class EmptyDataset(EcgMaeError, ValueError):
    pass


class UnfrozenEncoder(EcgMaeError, RuntimeError):
    pass


class InvalidLambda(EcgMaeError, ValueError):
    pass


class UnlabeledSegment(EcgMaeError, ValueError):
    pass


class VersionMismatch(EcgMaeError, ValueError):
    pass


class CorruptFile(EcgMaeError, ValueError):
    pass


# command line
class MissingPath(EcgMaeError, FileNotFoundError):
    pass


class IndexOutOfRange(EcgMaeError, IndexError):
    pass
