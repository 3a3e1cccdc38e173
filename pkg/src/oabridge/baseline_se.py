"""Built-in enhancers: identity, oracle and classical spectral subtraction."""

import logging
from typing import Optional

import numpy as np

from .audio_io import Waveform
from .errors import LengthMismatchError, MissingReferenceError, SignalTooShortError
from .schemas import StftConfig
from .spectral import Spectrogram, istft, stft

logger = logging.getLogger(__name__)


def se_identity(x: Waveform) -> Waveform:
    return Waveform(x.samples.copy(), x.sample_rate_hz)


def se_oracle(x: Waveform, clean_ref: Optional[Waveform]) -> Waveform:
    """Returns the known clean reference of a synthetic mix."""
    if clean_ref is None:
        raise MissingReferenceError('oracle enhancement needs a clean reference')
    if len(clean_ref) != len(x):
        raise LengthMismatchError(f'clean reference has {len(clean_ref)} samples, input has {len(x)}')
    return Waveform(clean_ref.samples.copy(), clean_ref.sample_rate_hz)


def noise_profile(spec: Spectrogram, noise_frames: int) -> np.ndarray:
    """Per-bin mean magnitude over the leading frames."""
    return spec.frames[:noise_frames].mean(axis=0)


def subtract_noise_profile(spec: Spectrogram, noise_frames: int = 10,
                           alpha: float = 1.0, beta: float = 0.02) -> Spectrogram:
    """max(|X| - alpha * profile, beta * |X|) per bin, original phases kept."""
    if spec.n_frames < noise_frames:
        raise SignalTooShortError(f'{spec.n_frames} frames, spectral subtraction needs {noise_frames}')
    magnitudes = spec.frames
    profile = noise_profile(spec, noise_frames)
    enhanced = np.maximum(magnitudes - alpha * profile, beta * magnitudes)
    return spec.with_magnitudes(enhanced)


def se_spectral_subtraction(x: Waveform, noise_frames: int = 10, alpha: float = 1.0,
                            beta: float = 0.02, stft_cfg: StftConfig = None) -> Waveform:
    """Spectral subtraction with a noise profile from the first noise_frames frames.

    The output is zero-padded to the input length where the trailing partial
    frame was dropped by the analysis.
    """
    if noise_frames < 1:
        raise ValueError(f'noise_frames must be positive, got {noise_frames}')
    stft_cfg = stft_cfg or StftConfig()
    spec = stft(x, stft_cfg)
    logger.debug(f'Spectral subtraction over {spec.n_frames} frames, alpha={alpha}, beta={beta}')
    out = istft(subtract_noise_profile(spec, noise_frames, alpha, beta)).samples
    padded = np.zeros(len(x))
    padded[:len(out)] = out
    return Waveform(padded, x.sample_rate_hz)
