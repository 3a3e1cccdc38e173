"""Mono WAV decoding/encoding and the pipeline's sample-rate contract."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import soundfile as sf

from .errors import (
    AudioFormatError,
    AudioReadError,
    AudioWriteError,
    ChannelCountError,
    LengthMismatchError,
    NonFiniteSampleError,
    SampleRateError,
    UnsupportedEncodingError,
)

logger = logging.getLogger(__name__)

PIPELINE_RATE_HZ = 16000
PCM16_SCALE = 32768.0
LENGTH_TOLERANCE = 0.01

_SUBTYPES = {'pcm16': 'PCM_16', 'float32': 'FLOAT'}


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono sample sequence at a fixed rate."""

    samples: np.ndarray
    sample_rate_hz: int = PIPELINE_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f'Waveform samples must be one-dimensional, got shape {samples.shape}')
        if self.sample_rate_hz <= 0:
            raise SampleRateError(f'sample rate must be positive, got {self.sample_rate_hz}')
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSampleError('waveform contains non-finite samples')
        object.__setattr__(self, 'samples', samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def require_pipeline_rate(w: Waveform) -> Waveform:
    if w.sample_rate_hz != PIPELINE_RATE_HZ:
        raise SampleRateError(f'expected {PIPELINE_RATE_HZ} Hz, got {w.sample_rate_hz} Hz')
    return w


def align_pair(a: Waveform, b: Waveform, tolerance: float = LENGTH_TOLERANCE) -> Tuple[Waveform, Waveform]:
    """Truncates both waveforms to the shorter length.

    Raises LengthMismatchError when the lengths differ by more than
    ``tolerance`` relative to the longer one.
    """
    if a.sample_rate_hz != b.sample_rate_hz:
        raise SampleRateError(f'sample rates differ: {a.sample_rate_hz} vs {b.sample_rate_hz}')
    longer = max(len(a), len(b))
    if longer == 0 or len(a) == len(b):
        return a, b
    if abs(len(a) - len(b)) / longer > tolerance:
        raise LengthMismatchError(f'lengths {len(a)} and {len(b)} differ by more than {tolerance:.0%}')
    n = min(len(a), len(b))
    return Waveform(a.samples[:n], a.sample_rate_hz), Waveform(b.samples[:n], b.sample_rate_hz)


def read_wav(path) -> Waveform:
    """Reads a mono 16 kHz WAV file holding 16-bit PCM or 32-bit float samples.

    PCM values are divided by 32768 so that -32768 maps to exactly -1.0.
    """
    logger.debug(f'Reading {path}')
    if not Path(path).is_file():
        logger.error(f'No such audio file: {path}')
        raise AudioReadError(f'{path}: no such file')
    try:
        info = sf.info(str(path))
    except (sf.LibsndfileError, RuntimeError) as e:
        logger.error(f'Cannot parse WAV header of {path}: {e}')
        raise AudioFormatError(f'{path}: malformed or unreadable WAV header') from e

    if info.format != 'WAV':
        raise AudioFormatError(f'{path}: container {info.format} is not RIFF/WAVE')
    if info.subtype not in _SUBTYPES.values():
        raise UnsupportedEncodingError(f'{path}: unsupported encoding {info.subtype}')
    if info.channels != 1:
        raise ChannelCountError(f'{path}: expected 1 channel, got {info.channels}')
    if info.samplerate != PIPELINE_RATE_HZ:
        raise SampleRateError(f'{path}: expected {PIPELINE_RATE_HZ} Hz, got {info.samplerate} Hz')

    try:
        if info.subtype == 'PCM_16':
            raw, _ = sf.read(str(path), dtype='int16', always_2d=False)
            samples = raw.astype(np.float64) / PCM16_SCALE
        else:
            raw, _ = sf.read(str(path), dtype='float32', always_2d=False)
            samples = raw.astype(np.float64)
    except (sf.LibsndfileError, RuntimeError) as e:
        logger.error(f'Cannot decode {path}: {e}')
        raise AudioFormatError(f'{path}: corrupt sample data') from e

    return Waveform(np.atleast_1d(samples), info.samplerate)


def write_wav(w: Waveform, path, encoding: str = 'pcm16') -> None:
    """Writes a waveform as a mono WAV file.

    pcm16 clamps to [-1, 1] before scaling by 32768; float32 stores samples as-is.
    """
    if encoding not in _SUBTYPES:
        raise UnsupportedEncodingError(f'unknown encoding {encoding}, expected one of {list(_SUBTYPES)}')
    if not np.all(np.isfinite(w.samples)):
        raise NonFiniteSampleError('refusing to write non-finite samples')

    if encoding == 'pcm16':
        scaled = np.round(np.clip(w.samples, -1.0, 1.0) * PCM16_SCALE)
        data = np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)
    else:
        data = w.samples.astype(np.float32)

    logger.debug(f'Writing {len(w)} samples to {path} as {encoding}')
    try:
        sf.write(str(path), data, w.sample_rate_hz, subtype=_SUBTYPES[encoding], format='WAV')
    except (sf.LibsndfileError, RuntimeError, OSError) as e:
        logger.error(f'Cannot write {path}: {e}')
        raise AudioWriteError(f'{path}: {e}') from e
