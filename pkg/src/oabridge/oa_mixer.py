import logging

import numpy as np

from .audio_io import Waveform, align_pair

logger = logging.getLogger(__name__)


def oa_mix(x: Waveform, x_hat: Waveform, s_prime: float) -> Waveform:
    """Observation adding: x~ = s' x + (1 - s') x^.

    Lengths are aligned by truncation to the shorter waveform, the same policy
    the bridge features use.
    """
    if not 0.0 <= s_prime <= 1.0:
        raise ValueError(f'OA coefficient must lie in [0, 1], got {s_prime}')
    x, x_hat = align_pair(x, x_hat)
    logger.debug(f'OA mix of {len(x)} samples with coefficient {s_prime}')

    if s_prime == 1.0:
        return Waveform(x.samples.copy(), x.sample_rate_hz)
    if s_prime == 0.0:
        return Waveform(x_hat.samples.copy(), x_hat.sample_rate_hz)

    mixed = s_prime * x.samples + (1.0 - s_prime) * x_hat.samples
    # rounding can leave the [min, max] hull by an ulp
    lower = np.minimum(x.samples, x_hat.samples)
    upper = np.maximum(x.samples, x_hat.samples)
    return Waveform(np.clip(mixed, lower, upper), x.sample_rate_hz)
