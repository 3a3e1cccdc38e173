"""Short-time spectral analysis/synthesis and frame-wise cosine similarity."""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import Waveform
from .errors import SignalTooShortError, SpectralShapeError
from .schemas import StftConfig

logger = logging.getLogger(__name__)

NORM_FLOOR = 1e-12
WEIGHT_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """T x F complex STFT frames plus the configuration that produced them."""

    complex_frames: np.ndarray
    config: StftConfig
    sample_rate_hz: int = 16000

    @property
    def frames(self) -> np.ndarray:
        """Magnitudes, T x F."""
        return np.abs(self.complex_frames)

    @property
    def n_frames(self) -> int:
        return self.complex_frames.shape[0]

    def with_magnitudes(self, magnitudes: np.ndarray) -> 'Spectrogram':
        """Same phases, new magnitudes."""
        if magnitudes.shape != self.complex_frames.shape:
            raise SpectralShapeError(f'magnitudes {magnitudes.shape} vs frames {self.complex_frames.shape}')
        phase = np.exp(1j * np.angle(self.complex_frames))
        return Spectrogram(magnitudes * phase, self.config, self.sample_rate_hz)


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window, w[n] = 0.5 (1 - cos(2 pi n / length))."""
    if length < 2:
        raise ValueError(f'window length must be at least 2, got {length}')
    n = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / length))


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    if n_samples < cfg.window_len:
        return 0
    return (n_samples - cfg.window_len) // cfg.hop_len + 1


def stft(w: Waveform, cfg: StftConfig = None) -> Spectrogram:
    """Windowed real DFT of each full frame; no padding or centering.

    Frames start at t * hop_len and the trailing partial frame is dropped.
    """
    cfg = cfg or StftConfig()
    n = len(w)
    if n < cfg.window_len:
        raise SignalTooShortError(f'{n} samples is shorter than one {cfg.window_len}-sample window')

    frames = sliding_window_view(w.samples, cfg.window_len)[::cfg.hop_len]
    spectrum = np.fft.rfft(frames * hann_window(cfg.window_len), n=cfg.window_len, axis=1)
    return Spectrogram(spectrum, cfg, w.sample_rate_hz)


def istft(s: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse of stft.

    Each output sample is divided by the accumulated squared window at that
    position; positions whose accumulation is below 1e-8 are set to zero.
    """
    cfg = s.config
    if s.complex_frames.ndim != 2 or s.complex_frames.shape[1] != cfg.n_bins:
        raise SpectralShapeError(
            f'expected T x {cfg.n_bins} frames for window {cfg.window_len}, got {s.complex_frames.shape}'
        )

    n_frames = s.n_frames
    if n_frames == 0:
        return Waveform(np.zeros(0), s.sample_rate_hz)

    window = hann_window(cfg.window_len)
    segments = np.fft.irfft(s.complex_frames, n=cfg.window_len, axis=1) * window
    length = (n_frames - 1) * cfg.hop_len + cfg.window_len
    out = np.zeros(length)
    weight = np.zeros(length)
    squared = window ** 2
    for t in range(n_frames):
        start = t * cfg.hop_len
        out[start:start + cfg.window_len] += segments[t]
        weight[start:start + cfg.window_len] += squared

    covered = weight >= WEIGHT_FLOOR
    out[covered] /= weight[covered]
    out[~covered] = 0.0
    return Waveform(out, s.sample_rate_hz)


def _magnitudes(x: Union[Spectrogram, np.ndarray]) -> np.ndarray:
    if isinstance(x, Spectrogram):
        return x.frames
    return np.abs(np.asarray(x, dtype=np.float64))


def frame_cosine_similarity(a: Union[Spectrogram, np.ndarray],
                            b: Union[Spectrogram, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-frame cosine similarity of two magnitude spectrograms.

    :returns:
        (similarities, valid) where valid is False for frames in which either
        magnitude vector has norm below 1e-12. Invalid frames carry 0.0.
    """
    ma = _magnitudes(a)
    mb = _magnitudes(b)
    if ma.shape != mb.shape or ma.ndim != 2:
        raise SpectralShapeError(f'spectrogram shapes differ: {ma.shape} vs {mb.shape}')

    norm_a = np.linalg.norm(ma, axis=1)
    norm_b = np.linalg.norm(mb, axis=1)
    valid = (norm_a >= NORM_FLOOR) & (norm_b >= NORM_FLOOR)

    sims = np.zeros(ma.shape[0])
    dots = np.einsum('tf,tf->t', ma[valid], mb[valid])
    sims[valid] = np.clip(dots / (norm_a[valid] * norm_b[valid]), 0.0, 1.0)
    return sims, valid
