"""Noisy-utterance synthesis at controlled SNRs, manifests, and stand-in signals."""

import json
import logging
import os
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.signal import lfilter

from .audio_io import PIPELINE_RATE_HZ, Waveform, read_wav, require_pipeline_rate, write_wav
from .errors import (
    DatasetError,
    EmptyWaveformError,
    ManifestError,
    NoiseTooShortError,
    SampleRateError,
    SilentInputError,
)
from .schemas import UtteranceRecord

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.jsonl'
PEAK_LEVEL = 0.5
PINK_POLE = 0.98
FULL_SCALE = 0.99
_PATH_FIELDS = ('clean_path', 'noise_path', 'noisy_path', 'enhanced_path')


def rms(w: Waveform) -> float:
    if len(w) == 0:
        raise EmptyWaveformError('rms of an empty waveform')
    return float(np.sqrt(np.mean(np.square(w.samples))))


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float) -> Tuple[Waveform, float]:
    """Adds noise to clean speech at the requested full-signal SNR.

    The noise is truncated from offset 0 to the clean length and scaled by
    g = rms(clean) / (rms(noise) * 10^(snr/20)).

    :returns:
        The noisy waveform and the applied noise gain.
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise SampleRateError(f'clean at {clean.sample_rate_hz} Hz, noise at {noise.sample_rate_hz} Hz')
    if len(noise) < len(clean):
        raise NoiseTooShortError(f'noise has {len(noise)} samples, clean needs {len(clean)}')

    segment = noise.samples[:len(clean)]
    clean_rms = rms(clean)
    noise_rms = float(np.sqrt(np.mean(np.square(segment)))) if len(segment) else 0.0
    if clean_rms == 0.0:
        raise SilentInputError('clean waveform is silent')
    if noise_rms == 0.0:
        raise SilentInputError('noise waveform is silent over the clean span')

    gain = clean_rms / (noise_rms * 10.0 ** (snr_db / 20.0))
    return Waveform(clean.samples + gain * segment, clean.sample_rate_hz), gain


def measured_snr_db(clean: Waveform, noisy: Waveform) -> float:
    """Full-signal SNR of a mix, treating noisy - clean as the noise."""
    residual = Waveform(noisy.samples - clean.samples, clean.sample_rate_hz)
    return 20.0 * np.log10(rms(clean) / rms(residual))


def _peak_normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    if peak == 0.0:
        return x
    return x * (PEAK_LEVEL / peak)


def _n_samples(duration_s: float) -> int:
    if duration_s <= 0:
        raise ValueError(f'duration must be positive, got {duration_s}')
    return int(round(duration_s * PIPELINE_RATE_HZ))


def gen_pseudo_speech(duration_s: float, seed: int) -> Waveform:
    """Harmonic stand-in for voiced speech.

    3 to 5 harmonics of a fundamental in 90-250 Hz, amplitude-modulated at a
    2-6 Hz syllabic rate, peak-normalized to 0.5.
    """
    rng = np.random.default_rng(seed)
    n = _n_samples(duration_s)
    t = np.arange(n) / PIPELINE_RATE_HZ

    f0 = rng.uniform(90.0, 250.0)
    n_harmonics = int(rng.integers(3, 6))
    amplitudes = rng.uniform(0.3, 1.0, size=n_harmonics) / np.arange(1, n_harmonics + 1)
    phases = rng.uniform(0.0, 2 * np.pi, size=n_harmonics)
    rate = rng.uniform(2.0, 6.0)

    voiced = np.zeros(n)
    for k in range(n_harmonics):
        voiced += amplitudes[k] * np.sin(2 * np.pi * (k + 1) * f0 * t + phases[k])
    envelope = 0.5 * (1.0 - np.cos(2 * np.pi * rate * t))
    return Waveform(_peak_normalize(voiced * envelope), PIPELINE_RATE_HZ)


def gen_noise(duration_s: float, kind: str, seed: int) -> Waveform:
    """Seeded stationary noise, peak-normalized to 0.5.

    ``pink-approx`` (alias ``pink``) runs white noise through the one-pole
    low-pass y[n] = x[n] + 0.98 y[n-1].
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(_n_samples(duration_s))
    if kind == 'white':
        out = white
    elif kind in ('pink-approx', 'pink'):
        out = lfilter([1.0], [1.0, -PINK_POLE], white)
    else:
        raise ValueError(f'unknown noise kind {kind}, expected white or pink-approx')
    return Waveform(_peak_normalize(out), PIPELINE_RATE_HZ)


def gen_corpus(out_dir, count: int, kind: str, duration_s: float, seed: int) -> List[Path]:
    """Writes ``count`` generated PCM16 files named <kind>_NNN.wav."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=count)
    paths = []
    for i, file_seed in enumerate(seeds):
        if kind == 'speech':
            w = gen_pseudo_speech(duration_s, int(file_seed))
        else:
            w = gen_noise(duration_s, kind, int(file_seed))
        path = out_dir / f'{kind}_{i:03d}.wav'
        write_wav(w, path)
        paths.append(path)
    logger.debug(f'Generated {count} {kind} files in {out_dir}')
    return paths


def write_manifest(records: Iterable[UtteranceRecord], path) -> Path:
    """Writes records as JSON lines sorted by id, with paths relative to the manifest."""
    path = Path(path)
    base = path.parent.resolve()
    rows = sorted(records, key=lambda r: r.id)
    seen = set()
    lines = []
    for record in rows:
        if record.id in seen:
            raise ManifestError(f'duplicate record id {record.id}')
        seen.add(record.id)
        data = record.model_dump(exclude_none=True)
        for field in _PATH_FIELDS:
            if field in data:
                data[field] = Path(os.path.relpath(Path(data[field]).resolve(), base)).as_posix()
        lines.append(json.dumps(data, ensure_ascii=False))
    path.write_text(''.join(line + '\n' for line in lines), encoding='utf-8')
    return path


def read_manifest(path) -> List[UtteranceRecord]:
    """Reads a JSON-lines manifest, resolving relative paths against its directory."""
    path = Path(path)
    base = path.parent
    records = []
    seen = set()
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ManifestError(f'cannot read manifest {path}: {e}') from e

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            record = UtteranceRecord(**data)
        except (json.JSONDecodeError, TypeError, ValidationError) as e:
            raise ManifestError(f'{path}:{lineno}: invalid record: {e}') from e
        if record.id in seen:
            raise ManifestError(f'{path}:{lineno}: duplicate record id {record.id}')
        seen.add(record.id)
        updates = {
            field: str(base / value)
            for field in _PATH_FIELDS
            if (value := getattr(record, field)) is not None and not Path(value).is_absolute()
        }
        records.append(record.model_copy(update=updates))
    return records


def _list_wavs(directory: Path) -> List[Path]:
    if not directory.is_dir():
        raise DatasetError(f'{directory} is not a directory')
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == '.wav')
    if not files:
        raise DatasetError(f'no .wav files in {directory}')
    return files


def _make_dir(directory: Path) -> Path:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f'cannot create {directory}: {e}') from e
    return directory


def _format_snr(snr_db: float) -> str:
    return f'{snr_db:+g}'


def synth_dataset(clean_dir, noise_dir, snrs_db: Sequence[float], seed: int, out_dir) -> Path:
    """Mixes every clean file with a seeded noise draw at every SNR.

    Noisy audio goes to <out_dir>/noisy/ and the manifest to
    <out_dir>/manifest.jsonl. A mix that would clip is attenuated as a
    whole; its record then points at a clean reference scaled by the same
    factor under <out_dir>/clean/, so the stored pair still measures the
    requested SNR. The result depends only on the input files, the SNR list
    and the seed.

    :returns:
        Path of the written manifest.
    """
    clean_files = _list_wavs(Path(clean_dir))
    noise_files = _list_wavs(Path(noise_dir))
    out_dir = Path(out_dir)
    noisy_dir = _make_dir(out_dir / 'noisy')

    logger.debug(f'Synthesizing {len(clean_files)} clean x {len(snrs_db)} SNRs with seed {seed}')
    rng = np.random.default_rng(seed)
    noises = {}
    records = []
    for clean_path in clean_files:
        clean = require_pipeline_rate(read_wav(clean_path))
        transcript_path = clean_path.with_suffix('.txt')
        transcript = transcript_path.read_text(encoding='utf-8').strip() if transcript_path.exists() else None

        for snr_db in snrs_db:
            noise_path = noise_files[int(rng.integers(len(noise_files)))]
            if noise_path not in noises:
                noises[noise_path] = require_pipeline_rate(read_wav(noise_path))
            noisy, gain = mix_at_snr(clean, noises[noise_path], snr_db)
            record_id = f'{clean_path.stem}_snr{_format_snr(snr_db)}'

            # an attenuated mix gets a clean reference scaled by the same factor
            reference_path = clean_path
            peak = float(np.max(np.abs(noisy.samples))) if len(noisy) else 0.0
            if peak > FULL_SCALE:
                scale = FULL_SCALE / peak
                logger.debug(f'{record_id}: attenuating mix by {scale:.4f}')
                noisy = Waveform(noisy.samples * scale, noisy.sample_rate_hz)
                reference_path = _make_dir(out_dir / 'clean') / f'{record_id}.wav'
                write_wav(Waveform(clean.samples * scale, clean.sample_rate_hz), reference_path)

            noisy_path = noisy_dir / f'{record_id}.wav'
            write_wav(noisy, noisy_path)
            logger.debug(f'{record_id}: noise {noise_path.name}, gain {gain:.6f}')
            records.append(UtteranceRecord(
                id=record_id,
                clean_path=str(reference_path),
                noise_path=str(noise_path),
                noisy_path=str(noisy_path),
                snr_db=float(snr_db),
                transcript=transcript,
            ))

    return write_manifest(records, out_dir / MANIFEST_NAME)
