import json
import logging
from unittest.mock import patch

import numpy as np
import pytest

from oabridge.adapters import parse_adapter
from oabridge.audio_io import Waveform, write_wav
from oabridge.baseline_se import se_spectral_subtraction
from oabridge.bridge import (
    MomentumSGD,
    build_training_set,
    clip,
    extract_features,
    fit_linear,
    load_model,
    loss_and_grad,
    predict,
    predict_files,
    save_model,
    score_pairs,
    train,
    with_clip_floor,
)
from oabridge.dataset_synth import gen_noise, gen_pseudo_speech, read_manifest
from oabridge.errors import (
    EmptyBatchError,
    FeatureDimensionError,
    LengthMismatchError,
    ModelSchemaError,
    ModelVersionError,
)
from oabridge.schemas import BridgeModel, FeatureConfig, StftConfig, TrainConfig


def toy_features(n_per_class=100, seed=0):
    """Separable pooled features: speech pairs near mean-sim 0.99, noise pairs near 0.10."""
    rng = np.random.default_rng(seed)

    def around(value):
        return value + rng.normal(0, 0.005, n_per_class)

    speech = np.column_stack([around(0.99), np.full(n_per_class, 0.01), around(0.97), np.ones(n_per_class)])
    noise = np.column_stack([around(0.10), np.full(n_per_class, 0.05), around(0.02), around(0.30)])
    return np.vstack([speech, noise]), np.concatenate([np.ones(n_per_class), np.zeros(n_per_class)])


def small_pairs(n=2):
    """Speech and noise items enhanced by spectral subtraction, as in-memory waveforms."""
    items = []
    for i in range(n):
        for signal, label in ((gen_pseudo_speech(0.5, seed=i), 1.0), (gen_noise(0.5, "white", seed=i), 0.0)):
            items.append((signal, se_spectral_subtraction(signal), label))
    return items


class TestExtractFeatures:
    """Test suite for extract_features."""

    def test_identical_inputs(self, speech):
        """Test enhanced == noisy -> mean 1, std 0, min 1, max 1."""
        features = extract_features(speech, speech)

        assert np.allclose(features.values, [1.0, 0.0, 1.0, 1.0], atol=1e-9)
        assert features.silent is False

    def test_silent_pair(self, caplog):
        """Test that an all-silent pair gives zero features and the silent flag."""
        silence = Waveform(np.zeros(4000))

        with caplog.at_level(logging.WARNING, logger="oabridge.bridge"):
            features = extract_features(silence, silence)

        assert features.values.tolist() == [0.0, 0.0, 0.0, 0.0]
        assert features.silent is True
        assert "silent" in caplog.text

    def test_pooled_statistics(self, speech):
        """Test similarities {0.5, 1.0} -> mean 0.75, population std 0.25, min 0.5, max 1.0."""
        sims = (np.array([0.5, 1.0, 0.0]), np.array([True, True, False]))
        with patch("oabridge.bridge.frame_cosine_similarity", return_value=sims):
            features = extract_features(speech, speech)

        assert features.values.tolist() == [0.75, 0.25, 0.5, 1.0]

    def test_statistics_order_follows_config(self, speech, white_noise):
        """Test that the feature vector follows the configured statistics."""
        full = extract_features(speech, white_noise)
        reduced = extract_features(speech, white_noise, FeatureConfig(statistics=["max", "mean"]))

        assert reduced.values.tolist() == [full.values[3], full.values[0]]

    def test_global_rescaling_invariance(self, speech, white_noise):
        """Test invariance to scaling both inputs by the same positive factor."""
        base = extract_features(speech, white_noise).values
        scaled = extract_features(Waveform(0.3 * speech.samples), Waveform(0.3 * white_noise.samples)).values

        assert np.allclose(base, scaled, atol=1e-9)

    def test_length_mismatch(self, speech):
        """Test that a length difference above 1% raises LengthMismatchError."""
        with pytest.raises(LengthMismatchError):
            extract_features(speech, Waveform(speech.samples[:15000]))

    def test_small_length_difference(self, speech):
        """Test that lengths within 1% are aligned by truncation."""
        features = extract_features(speech, Waveform(speech.samples[:15900]))

        assert features.values[0] == pytest.approx(1.0, abs=1e-9)


class TestPredict:
    """Test suite for predict and clip."""

    def test_in_range(self, sample_model):
        """Test w=[1,0,0,0], b=0, mean 0.9 -> S=0.9, S'=0.9."""
        s, s_prime = predict(sample_model, [0.9, 0.1, 0.5, 1.0])

        assert (s, s_prime) == (0.9, 0.9)

    def test_floor(self, sample_model):
        """Test mean 0.3 -> S=0.3, S'=0.6."""
        s, s_prime = predict(sample_model, [0.3, 0.0, 0.0, 0.0])

        assert s == pytest.approx(0.3)
        assert s_prime == 0.6

    def test_ceiling(self):
        """Test b=0.5, mean 0.9 -> S=1.4, S'=1.0."""
        model = BridgeModel(weights=[1.0, 0.0, 0.0, 0.0], bias=0.5)

        s, s_prime = predict(model, [0.9, 0.0, 0.0, 0.0])

        assert s == pytest.approx(1.4)
        assert s_prime == 1.0

    def test_dimension_mismatch(self, sample_model):
        """Test that a wrong feature count raises FeatureDimensionError."""
        with pytest.raises(FeatureDimensionError):
            predict(sample_model, [0.9, 0.1])

    def test_clip_defaults(self):
        """Test clip(0.3)=0.6, clip(0.8)=0.8, clip(1.7)=1.0 with the default range."""
        assert clip(0.3, 0.6, 1.0) == 0.6
        assert clip(0.8, 0.6, 1.0) == 0.8
        assert clip(1.7, 0.6, 1.0) == 1.0

    def test_s_prime_always_in_clip_range(self):
        """Test S' in [floor, ceil] for random models and features."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            model = BridgeModel(weights=rng.normal(0, 3, 4).tolist(), bias=float(rng.normal()))
            _, s_prime = predict(model, rng.uniform(0, 1, 4))
            assert 0.6 <= s_prime <= 1.0

    def test_with_clip_floor(self, sample_model):
        """Test that floor 0 keeps S' = S inside [0, 1]."""
        _, s_prime = predict(with_clip_floor(sample_model, 0.0), [0.3, 0.0, 0.0, 0.0])

        assert s_prime == pytest.approx(0.3)
        assert sample_model.clip_floor == 0.6

    def test_invalid_clip_range(self):
        """Test that floor >= ceil is rejected."""
        with pytest.raises(ValueError):
            BridgeModel(weights=[0.0] * 4, bias=0.0, clip_floor=0.8, clip_ceil=0.8)


class TestLossAndGrad:
    """Test suite for loss_and_grad."""

    def test_single_item(self):
        """Test w=0, b=0, f=[1,0,0,0], y=1 -> loss 1, grad_b -2, grad_w [-2,0,0,0]."""
        model = BridgeModel(weights=[0.0] * 4, bias=0.0)

        loss, grad_w, grad_b = loss_and_grad(model, [([1.0, 0.0, 0.0, 0.0], 1.0)])

        assert loss == 1.0
        assert grad_b == -2.0
        assert grad_w.tolist() == [-2.0, 0.0, 0.0, 0.0]

    def test_optimum(self, sample_model):
        """Test that exact predictions give zero loss and gradients."""
        batch = [([0.2, 0.0, 0.0, 0.0], 0.2), ([0.7, 0.0, 0.0, 0.0], 0.7)]

        loss, grad_w, grad_b = loss_and_grad(sample_model, batch)

        assert loss == 0.0
        assert not grad_w.any()
        assert grad_b == 0.0

    def test_symmetric_errors_cancel(self):
        """Test that errors +e and -e on identical features cancel in grad_w."""
        model = BridgeModel(weights=[0.5, 0.0, 0.0, 0.0], bias=0.0)
        f = [1.0, 0.0, 0.0, 0.0]

        _, grad_w, _ = loss_and_grad(model, [(f, 0.3), (f, 0.7)])

        assert np.allclose(grad_w, 0.0, atol=1e-15)

    def test_pre_clip_output_used(self, sample_model):
        """Test that the loss sees S below the clip floor."""
        loss, _, _ = loss_and_grad(sample_model, [([0.1, 0.0, 0.0, 0.0], 0.0)])

        assert loss == pytest.approx(0.01)

    def test_empty_batch(self, sample_model):
        """Test that an empty batch raises EmptyBatchError."""
        with pytest.raises(EmptyBatchError):
            loss_and_grad(sample_model, [])

    def test_label_out_of_range(self, sample_model):
        """Test that a label above 1 raises ValueError."""
        with pytest.raises(ValueError):
            loss_and_grad(sample_model, [([0.1, 0.0, 0.0, 0.0], 2.0)])


class TestTraining:
    """Test suite for momentum SGD training."""

    def test_momentum_update(self):
        """Test v <- m v - lr g; p <- p + v over two steps."""
        opt = MomentumSGD(1, learning_rate=0.1, momentum=0.5)

        opt.step(np.array([1.0]), 1.0)
        opt.step(np.array([1.0]), 1.0)

        assert opt.weights[0] == pytest.approx(-0.1 + (-0.05 - 0.1))
        assert opt.bias == pytest.approx(0.5 - 0.1 - 0.15)

    def test_toy_set_converges(self):
        """Test MSE < 0.05 within 200 epochs at the default hyperparameters, bounded by least squares."""
        x, y = toy_features()

        weights, bias, history = fit_linear(x, y, TrainConfig())

        mse = float(np.mean((x @ weights + bias - y) ** 2))
        design = np.column_stack([x, np.ones(len(y))])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        best = float(np.mean((design @ coef - y) ** 2))
        assert len(history) == 200
        assert best <= mse + 1e-12
        assert mse < 0.05

    def test_full_batch_loss_nonincreasing(self):
        """Test that full-batch loss never rises at lr 1e-4."""
        x, y = toy_features(n_per_class=20)

        _, _, history = fit_linear(x, y, TrainConfig(batch_size=len(y), epochs=50))

        assert all(b <= a + 1e-15 for a, b in zip(history, history[1:]))
        assert history[-1] < history[0]

    def test_raw_features_without_standardization(self):
        """Test that standardization can be switched off."""
        x, y = toy_features(n_per_class=20)

        weights, bias, _ = fit_linear(x, y, TrainConfig(standardize=False, learning_rate=0.05, epochs=300))

        assert float(np.mean((x @ weights + bias - y) ** 2)) < 0.05

    def test_zero_learning_rate_returns_initialization(self):
        """Test lr=0 -> zero weights and bias 0.5."""
        model = train(small_pairs(1), TrainConfig(learning_rate=0.0, epochs=2))

        assert model.weights == [0.0, 0.0, 0.0, 0.0]
        assert model.bias == 0.5

    def test_same_seed_identical_models(self):
        """Test that two runs with one seed give identical weights, crops included."""
        cfg = TrainConfig(epochs=3, batch_size=2, crop_len_samples=4000, seed=5)

        first = train(small_pairs(), cfg)
        second = train(small_pairs(), cfg)

        assert first.weights == second.weights
        assert first.bias == second.bias

    def test_trained_model_separates_classes(self):
        """Test that a trained model scores speech above noise."""
        pairs = small_pairs(3)
        model = train(pairs, TrainConfig())

        scores = score_pairs(model, [(a, b) for a, b, _ in pairs])
        labels = np.array([label for _, _, label in pairs])

        assert scores[labels == 1.0].min() > scores[labels == 0.0].max()

    def test_single_class_warns(self, caplog):
        """Test that a single-label dataset trains with a warning."""
        x, _ = toy_features(n_per_class=5)

        with caplog.at_level(logging.WARNING, logger="oabridge.bridge"):
            fit_linear(x, np.ones(len(x)), TrainConfig(epochs=2))

        assert "single label" in caplog.text

    def test_empty_dataset(self):
        """Test that no items raise EmptyBatchError."""
        with pytest.raises(EmptyBatchError):
            train([], TrainConfig())

    def test_build_training_set(self, tmp_path, small_manifest):
        """Test that distinct clean files get label 1 and distinct noise files label 0."""
        records = read_manifest(small_manifest)

        dataset = build_training_set(records, parse_adapter("builtin:specsub"), tmp_path / "train")

        noise_files = {r.noise_path for r in records}
        assert [label for _, _, label in dataset].count(1.0) == 2
        assert [label for _, _, label in dataset].count(0.0) == len(noise_files)
        assert all(enhanced.exists() for _, enhanced, _ in dataset)

        model = train(dataset, TrainConfig(epochs=5))
        assert len(model.weights) == 4


class TestModelFiles:
    """Test suite for save_model and load_model."""

    @pytest.fixture
    def model(self):
        return BridgeModel(
            weights=[0.1234567890123, -2.5e-7, 3.0, 1 / 3],
            bias=-0.7,
            clip_floor=0.55,
            feature_config=FeatureConfig(),
            stft_config=StftConfig(window_len=512, hop_len=128),
        )

    def test_round_trip(self, tmp_path, model):
        """Test that load(save(m)) equals m field for field."""
        path = tmp_path / "model.json"
        save_model(model, path)

        assert load_model(path) == model

    def test_file_layout(self, tmp_path, model):
        """Test the self-describing fields of the model file."""
        path = tmp_path / "model.json"
        save_model(model, path)

        data = json.loads(path.read_text())

        assert data["format_version"] == 1
        assert data["stft"]["window_len"] == 512
        assert data["stft"]["hop_len"] == 128
        assert data["features"] == ["mean", "std", "min", "max"]
        assert data["weights"][3] == 1 / 3
        assert data["clip_floor"] == 0.55

    def _write(self, tmp_path, model, **changes):
        path = tmp_path / "model.json"
        save_model(model, path)
        data = json.loads(path.read_text())
        data.update(changes)
        path.write_text(json.dumps(data))
        return path, data

    def test_clip_floor_out_of_range(self, tmp_path, model):
        """Test that clip_floor=1.2 is a schema violation."""
        path, _ = self._write(tmp_path, model, clip_floor=1.2)

        with pytest.raises(ModelSchemaError):
            load_model(path)

    def test_missing_weights(self, tmp_path, model):
        """Test that a file without weights is a schema violation."""
        path, data = self._write(tmp_path, model)
        del data["weights"]
        path.write_text(json.dumps(data))

        with pytest.raises(ModelSchemaError):
            load_model(path)

    def test_unknown_field(self, tmp_path, model):
        """Test that unexpected fields are rejected."""
        path, _ = self._write(tmp_path, model, extra_field=1)

        with pytest.raises(ModelSchemaError):
            load_model(path)

    def test_version_mismatch(self, tmp_path, model):
        """Test that format_version 2 raises ModelVersionError."""
        path, _ = self._write(tmp_path, model, format_version=2)

        with pytest.raises(ModelVersionError):
            load_model(path)

    def test_not_json(self, tmp_path):
        """Test that a non-JSON file raises ModelSchemaError."""
        path = tmp_path / "model.json"
        path.write_text("weights: [1, 2]")

        with pytest.raises(ModelSchemaError):
            load_model(path)

    def test_predict_files(self, tmp_path, sample_model, speech):
        """Test prediction straight from files."""
        write_wav(speech, tmp_path / "a.wav")

        s, s_prime = predict_files(sample_model, tmp_path / "a.wav", tmp_path / "a.wav")

        assert s == pytest.approx(1.0, abs=1e-9)
        assert s_prime == pytest.approx(1.0, abs=1e-9)
