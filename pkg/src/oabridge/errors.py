"""Named exceptions raised by the oabridge toolkit.

Every error derives from ``OABridgeError`` and from the closest builtin
exception, so callers may catch either the toolkit family or the builtin.
"""


class OABridgeError(Exception):
    """Base class for all toolkit errors."""


# audio

class AudioFormatError(OABridgeError, ValueError):
    """The file is not a well-formed RIFF/WAVE container."""


class UnsupportedEncodingError(AudioFormatError):
    """The sample encoding is neither 16-bit PCM nor 32-bit float."""


class ChannelCountError(AudioFormatError):
    """The file has more than one channel."""


class SampleRateError(OABridgeError, ValueError):
    """The sample rate differs from the pipeline rate."""


class NonFiniteSampleError(OABridgeError, ValueError):
    """A waveform holds NaN or infinite samples."""


class AudioReadError(OABridgeError, OSError):
    """The audio file does not exist or cannot be opened."""


class AudioWriteError(OABridgeError, OSError):
    """Encoding or writing a WAV file failed."""


class LengthMismatchError(OABridgeError, ValueError):
    """Two waveforms differ in length by more than the allowed tolerance."""


class EmptyWaveformError(OABridgeError, ValueError):
    """An operation needs at least one sample."""


# synthesis

class SilentInputError(OABridgeError, ValueError):
    """Clean or noise input has zero energy."""


class NoiseTooShortError(OABridgeError, ValueError):
    """The noise waveform is shorter than the clean waveform."""


class ManifestError(OABridgeError, ValueError):
    """A manifest file is malformed."""


class DatasetError(OABridgeError, ValueError):
    """Input directories or output locations are unusable."""


# spectral

class SignalTooShortError(OABridgeError, ValueError):
    """The signal is shorter than one analysis window."""


class SpectralShapeError(OABridgeError, ValueError):
    """Spectrogram dimensions are inconsistent."""


# bridge

class FeatureDimensionError(OABridgeError, ValueError):
    """Feature vector dimension does not match the model."""


class EmptyBatchError(OABridgeError, ValueError):
    """A training batch holds no items."""


class ModelVersionError(OABridgeError, ValueError):
    """The model file declares an unsupported format version."""


class ModelSchemaError(OABridgeError, ValueError):
    """The model file violates the model schema."""


# adapters

class AdapterSpecError(OABridgeError, ValueError):
    """An adapter string or template is invalid."""


class AdapterError(OABridgeError, RuntimeError):
    """An external adapter failed.

    ``diagnostics`` holds whatever the adapter printed before failing.
    """

    def __init__(self, message: str, diagnostics: str = ''):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if self.diagnostics:
            return f'{base}: {self.diagnostics.strip()}'
        return base


class AdapterTimeoutError(AdapterError):
    """An external adapter exceeded its time limit."""


class AdapterOutputError(AdapterError):
    """An external adapter produced no decodable output."""


class MissingReferenceError(OABridgeError, ValueError):
    """The oracle enhancer has no clean reference to return."""


# scoring

class EmptyReferenceError(OABridgeError, ValueError):
    """WER is undefined for an empty reference."""
