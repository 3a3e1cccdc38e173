"""Bridge module: pooled spectrogram-similarity features, a linear SNR-level
predictor S, the clipped observation-adding coefficient S', its momentum-SGD
training loop and model files.

Typical usage example:

    model = load_model('bridge.json')
    features = extract_features(noisy, enhanced, model.feature_config, model.stft_config)
    s, s_prime = predict(model, features.values)
"""

import json
import logging
from pathlib import Path
from typing import Callable, List, NamedTuple, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .adapters import run_se
from .audio_io import Waveform, align_pair, read_wav, require_pipeline_rate
from .errors import (
    EmptyBatchError,
    FeatureDimensionError,
    ModelSchemaError,
    ModelVersionError,
)
from .schemas import AdapterSpec, BridgeModel, FeatureConfig, ModelFile, StftConfig, TrainConfig, UtteranceRecord
from .spectral import frame_cosine_similarity, stft

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
INITIAL_BIAS = 0.5

_POOLING = {
    'mean': np.mean,
    'std': np.std,
    'min': np.min,
    'max': np.max,
}


class Features(NamedTuple):
    values: np.ndarray
    silent: bool


class Prediction(NamedTuple):
    s: float
    s_prime: float


def extract_features(noisy: Waveform, enhanced: Waveform,
                     cfg: FeatureConfig = None, stft_cfg: StftConfig = None) -> Features:
    """Pools frame-wise cosine similarities of the two spectrograms.

    Statistics use valid frames only, with population standard deviation.
    When no frame is valid the all-zero vector is returned with silent=True.
    """
    cfg = cfg or FeatureConfig()
    stft_cfg = stft_cfg or StftConfig()
    require_pipeline_rate(noisy)
    require_pipeline_rate(enhanced)
    noisy, enhanced = align_pair(noisy, enhanced)

    sims, valid = frame_cosine_similarity(stft(noisy, stft_cfg), stft(enhanced, stft_cfg))
    if not valid.any():
        logger.warning('No valid similarity frames: silent input, returning zero features')
        return Features(np.zeros(cfg.dimension), True)

    pooled = sims[valid]
    return Features(np.array([_POOLING[name](pooled) for name in cfg.statistics], dtype=np.float64), False)


def clip(s: float, floor: float, ceil: float) -> float:
    return max(floor, min(ceil, s))


def predict(model: BridgeModel, features: Sequence[float]) -> Prediction:
    """S = w.f + b and S' = clip(S, floor, ceil)."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape != (len(model.weights),):
        raise FeatureDimensionError(f'model expects {len(model.weights)} features, got shape {f.shape}')
    s = float(np.dot(np.asarray(model.weights), f) + model.bias)
    return Prediction(s, clip(s, model.clip_floor, model.clip_ceil))


def with_clip_floor(model: BridgeModel, floor: float) -> BridgeModel:
    """Same predictor with another clip floor (floor 0 gives the plain SNR-level method)."""
    return BridgeModel(**{**model.model_dump(), 'clip_floor': floor})


def _stack_batch(batch) -> Tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise EmptyBatchError('loss of an empty batch')
    x = np.array([np.asarray(f, dtype=np.float64) for f, _ in batch])
    y = np.array([float(label) for _, label in batch])
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError('labels must lie in [0, 1]')
    return x, y


def _mse_and_grad(weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray):
    residual = x @ weights + bias - y
    n = len(y)
    loss = float(np.mean(residual ** 2))
    grad_w = 2.0 * (x.T @ residual) / n
    grad_b = float(2.0 * np.mean(residual))
    return loss, grad_w, grad_b


def loss_and_grad(model: BridgeModel, batch) -> Tuple[float, np.ndarray, float]:
    """MSE of the pre-clip output S against the labels, and its gradient.

    :returns:
        (loss, grad_w, grad_b)
    """
    x, y = _stack_batch(batch)
    if x.shape[1] != len(model.weights):
        raise FeatureDimensionError(f'model expects {len(model.weights)} features, batch has {x.shape[1]}')
    return _mse_and_grad(np.asarray(model.weights, dtype=np.float64), model.bias, x, y)


class MomentumSGD:
    """Classical momentum: v <- momentum * v - lr * grad; param <- param + v."""

    def __init__(self, dim: int, learning_rate: float, momentum: float):
        self.lr = learning_rate
        self.momentum = momentum
        self.weights = np.zeros(dim)
        self.bias = INITIAL_BIAS
        self.velocity_w = np.zeros(dim)
        self.velocity_b = 0.0

    def step(self, grad_w: np.ndarray, grad_b: float):
        self.velocity_w = self.momentum * self.velocity_w - self.lr * grad_w
        self.velocity_b = self.momentum * self.velocity_b - self.lr * grad_b
        self.weights = self.weights + self.velocity_w
        self.bias = self.bias + self.velocity_b


class _Standardizer:
    def __init__(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        scale = x.std(axis=0)
        self.scale = np.where(scale > 0.0, scale, 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def fold(self, weights: np.ndarray, bias: float) -> Tuple[np.ndarray, float]:
        """Expresses standardized-space parameters on raw features."""
        raw_w = weights / self.scale
        return raw_w, float(bias - np.dot(raw_w, self.mean))


def _run_epochs(epoch_features: Callable[[int, np.ndarray], np.ndarray], labels: np.ndarray,
                cfg: TrainConfig, rng: np.random.Generator, dim: int) -> Tuple[np.ndarray, float, List[float]]:
    """Shared SGD loop; epoch_features(epoch, order) yields the feature rows for that epoch."""
    optimizer = MomentumSGD(dim, cfg.learning_rate, cfg.momentum)
    standardizer = None
    history = []
    n = len(labels)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        x = epoch_features(epoch, order)
        y = labels[order]
        if cfg.standardize:
            if standardizer is None:
                standardizer = _Standardizer(x)
            x = standardizer.apply(x)

        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            xb = x[start:start + cfg.batch_size]
            yb = y[start:start + cfg.batch_size]
            loss, grad_w, grad_b = _mse_and_grad(optimizer.weights, optimizer.bias, xb, yb)
            optimizer.step(grad_w, grad_b)
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
        logger.debug(f'epoch {epoch + 1}/{cfg.epochs}: mean batch MSE {history[-1]:.6f}')

    weights, bias = optimizer.weights, float(optimizer.bias)
    if standardizer is not None:
        weights, bias = standardizer.fold(weights, bias)
    return weights, bias, history


def _warn_single_class(labels: np.ndarray):
    if len(np.unique(labels)) < 2:
        logger.warning(f'Training set holds a single label ({labels[0]}); the predictor will be degenerate')


def fit_linear(features: np.ndarray, labels: Sequence[float],
               cfg: TrainConfig = None) -> Tuple[np.ndarray, float, List[float]]:
    """Momentum SGD on a fixed feature matrix.

    :returns:
        (weights, bias, per-epoch mean batch loss)
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(y) == 0:
        raise EmptyBatchError('no training items')
    _warn_single_class(y)
    rng = np.random.default_rng(cfg.seed)
    return _run_epochs(lambda epoch, order: x[order], y, cfg, rng, x.shape[1])


def train(dataset: Sequence[Tuple[object, object, float]], cfg: TrainConfig = None,
          feature_cfg: FeatureConfig = None, stft_cfg: StftConfig = None,
          clip_floor: float = 0.6, clip_ceil: float = 1.0) -> BridgeModel:
    """Trains the linear predictor on (noisy, enhanced, label) items.

    Items are file paths or Waveforms. Each epoch shuffles the items and crops
    every pair to crop_len_samples from a seeded random offset; pairs not
    longer than the crop are featurized once. Weights start at zero, bias at
    0.5. Clipping is not part of the training loss.
    """
    cfg = cfg or TrainConfig()
    feature_cfg = feature_cfg or FeatureConfig()
    stft_cfg = stft_cfg or StftConfig()
    if len(dataset) == 0:
        raise EmptyBatchError('no training items')

    pairs = []
    for noisy, enhanced, _ in dataset:
        a = noisy if isinstance(noisy, Waveform) else read_wav(noisy)
        b = enhanced if isinstance(enhanced, Waveform) else read_wav(enhanced)
        pairs.append(align_pair(require_pipeline_rate(a), require_pipeline_rate(b)))
    labels = np.array([float(label) for _, _, label in dataset])
    if np.any((labels < 0.0) | (labels > 1.0)):
        raise ValueError('labels must lie in [0, 1]')
    _warn_single_class(labels)
    logger.info(f'Training on {len(pairs)} pairs ({int(np.sum(labels >= 0.5))} speech-labelled)')

    rng = np.random.default_rng(cfg.seed)
    crop = cfg.crop_len_samples
    fixed = {}
    for i, (a, b) in enumerate(pairs):
        if len(a) <= crop:
            fixed[i] = extract_features(a, b, feature_cfg, stft_cfg).values

    def epoch_features(epoch: int, order: np.ndarray) -> np.ndarray:
        rows = []
        for i in order:
            if i in fixed:
                rows.append(fixed[i])
                continue
            a, b = pairs[i]
            offset = int(rng.integers(0, len(a) - crop + 1))
            a_crop = Waveform(a.samples[offset:offset + crop], a.sample_rate_hz)
            b_crop = Waveform(b.samples[offset:offset + crop], b.sample_rate_hz)
            rows.append(extract_features(a_crop, b_crop, feature_cfg, stft_cfg).values)
        return np.array(rows)

    weights, bias, history = _run_epochs(epoch_features, labels, cfg, rng, feature_cfg.dimension)
    logger.info(f'Final epoch MSE {history[-1]:.6f}')
    return BridgeModel(
        weights=[float(w) for w in weights],
        bias=bias,
        clip_floor=clip_floor,
        clip_ceil=clip_ceil,
        feature_config=feature_cfg,
        stft_config=stft_cfg,
    )


def save_model(model: BridgeModel, path) -> None:
    payload = ModelFile(
        format_version=FORMAT_VERSION,
        stft=model.stft_config,
        features=list(model.feature_config.statistics),
        weights=list(model.weights),
        bias=model.bias,
        clip_floor=model.clip_floor,
        clip_ceil=model.clip_ceil,
    )
    # stdlib json writes floats with repr, which round-trips exactly
    Path(path).write_text(json.dumps(payload.model_dump(mode='json'), indent=2) + '\n', encoding='utf-8')
    logger.debug(f'Saved model to {path}')


def load_model(path) -> BridgeModel:
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ModelSchemaError(f'{path}: not a JSON model file: {e}') from e
    if not isinstance(data, dict):
        raise ModelSchemaError(f'{path}: model file must hold a JSON object')
    if 'format_version' not in data:
        raise ModelSchemaError(f'{path}: missing format_version')
    if data['format_version'] != FORMAT_VERSION:
        raise ModelVersionError(f'{path}: format_version {data["format_version"]}, expected {FORMAT_VERSION}')

    try:
        payload = ModelFile(**data)
        return BridgeModel(
            weights=payload.weights,
            bias=payload.bias,
            clip_floor=payload.clip_floor,
            clip_ceil=payload.clip_ceil,
            feature_config=FeatureConfig(statistics=payload.features),
            stft_config=payload.stft,
        )
    except ValidationError as e:
        logger.error(f'Invalid model file {path}: {e}')
        raise ModelSchemaError(f'{path}: {e}') from e


def predict_files(model: BridgeModel, noisy_path, enhanced_path) -> Prediction:
    noisy = read_wav(noisy_path)
    enhanced = read_wav(enhanced_path)
    features = extract_features(noisy, enhanced, model.feature_config, model.stft_config)
    return predict(model, features.values)


def score_pairs(model: BridgeModel, pairs: Sequence[Tuple[Waveform, Waveform]]) -> np.ndarray:
    """Pre-clip S for each (noisy, enhanced) pair."""
    return np.array([
        predict(model, extract_features(a, b, model.feature_config, model.stft_config).values).s
        for a, b in pairs
    ])


def build_training_set(records: Sequence[UtteranceRecord], se: AdapterSpec, workdir,
                       timeout: float = 300.0) -> List[Tuple[Path, Path, float]]:
    """Pure-speech (label 1) and pure-noise (label 0) pairs from a manifest.

    Every distinct clean file and every distinct noise file is enhanced once
    through ``se``; the originals stand in as the noisy inputs.
    """
    sources = {}
    for record in records:
        if record.clean_path:
            sources.setdefault(str(record.clean_path), 1.0)
        if record.noise_path:
            sources.setdefault(str(record.noise_path), 0.0)
    if not sources:
        raise EmptyBatchError('manifest names no clean or noise files to train on')

    dataset = []
    for i, path in enumerate(sorted(sources)):
        label = sources[path]
        kind = 'speech' if label == 1.0 else 'noise'
        item = UtteranceRecord(
            id=f'train_{i:05d}_{kind}_{Path(path).stem}',
            noisy_path=path,
            clean_path=path if label == 1.0 else None,
        )
        enhanced_path = run_se(se, item, workdir, timeout)
        dataset.append((Path(path), enhanced_path, label))
    logger.info(f'Built {len(dataset)} training pairs through {se.kind}:{se.target}')
    return dataset
