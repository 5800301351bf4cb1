"""Exception types raised across the toolkit.

Everything derives from SpeechConfError so callers can catch the whole
family; individual classes exist because the contracts name them.
"""


class SpeechConfError(Exception):
    pass


# --- audio ---------------------------------------------------------------

class UnsupportedEncoding(SpeechConfError):
    """WAV file uses a codec other than integer/float PCM."""


class CorruptHeader(SpeechConfError):
    """File is not a parseable RIFF/WAVE container."""


class EmptyClip(SpeechConfError):
    pass


class ClipTooShort(SpeechConfError):
    pass


class NonCanonicalRate(SpeechConfError):
    """Operation requires the canonical 16 kHz mono form."""


# --- features ------------------------------------------------------------

class HeaderMismatch(SpeechConfError):
    pass


class DimensionMismatch(SpeechConfError):
    pass


class NonFiniteValue(SpeechConfError):
    pass


class UnfilledSlot(SpeechConfError):
    """A layout slot the extractor cannot compute. Never silently zeroed."""


class ProbabilityOutOfRange(SpeechConfError):
    pass


class DoubleNormalization(SpeechConfError):
    pass


class EmptyTrainingSet(SpeechConfError):
    pass


# --- annotation ----------------------------------------------------------

class InsufficientCompleteCases(SpeechConfError):
    pass


class ClipWithoutValidAnnotations(SpeechConfError):
    pass


# --- neural --------------------------------------------------------------

class DimMismatch(SpeechConfError):
    pass


class BatchTooSmallForBatchNorm(SpeechConfError):
    pass


class AllWeightsZero(SpeechConfError):
    pass


class ShapeMismatch(SpeechConfError):
    pass


class StepOutOfRange(SpeechConfError):
    pass


class EmptyClass(SpeechConfError):
    pass


# --- calibration ---------------------------------------------------------

class DegenerateLabels(SpeechConfError):
    """Calibration needs at least two distinct labels."""


class NonPositiveTemperature(SpeechConfError):
    pass


# --- pseudo-labelling ----------------------------------------------------

class LeakageDetected(SpeechConfError):
    """A held-out test id reached a training artifact."""


class ClassAbsent(SpeechConfError):
    pass


class PoolOverlapsGroundTruth(SpeechConfError):
    pass


class EmptyPseudoSet(SpeechConfError):
    pass


# --- hybrid --------------------------------------------------------------

class UnknownSource(SpeechConfError):
    pass


class NormalizerMismatch(SpeechConfError):
    """Sample was normalized with statistics foreign to the model."""


# --- evaluation ----------------------------------------------------------

class ClassTooSmall(SpeechConfError):
    pass


class ChecksumMismatch(SpeechConfError):
    """Fold plan content does not match its recorded checksum."""


class MissingStore(SpeechConfError):
    pass


class TooFewSamples(SpeechConfError):
    pass


class EmptyInput(SpeechConfError):
    pass


# --- cli / config --------------------------------------------------------

class UnknownVerb(SpeechConfError):
    pass


class ConfigError(SpeechConfError):
    pass
