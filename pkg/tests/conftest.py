"""Pytest configuration and shared fixtures."""

import shlex
import sys

import pytest

from oabridge.dataset_synth import gen_corpus, gen_noise, gen_pseudo_speech, synth_dataset
from oabridge.oab_config import OABConfig
from oabridge.schemas import BridgeModel

TRANSCRIPTS = ["hello world", "good morning"]


@pytest.fixture
def speech():
    """One second of seeded pseudo-speech."""
    return gen_pseudo_speech(1.0, seed=7)


@pytest.fixture
def white_noise():
    """One second of seeded white noise."""
    return gen_noise(1.0, "white", seed=3)


@pytest.fixture
def sample_model():
    """Bridge model whose S is the mean similarity."""
    return BridgeModel(weights=[1.0, 0.0, 0.0, 0.0], bias=0.0)


@pytest.fixture
def sample_config(tmp_path):
    """Create a sample configuration writing derived audio under tmp_path."""
    return OABConfig(
        workdir=str(tmp_path / "work"),
        adapter_timeout_s=60,
        jobs=1,
        asr_backoff=False,
    )


@pytest.fixture
def corpus_dirs(tmp_path):
    """Two clean pseudo-speech files with transcripts and two white-noise files."""
    clean_dir = tmp_path / "clean"
    noise_dir = tmp_path / "noise"
    clean_paths = gen_corpus(clean_dir, 2, "speech", 1.0, seed=11)
    gen_corpus(noise_dir, 2, "white", 1.2, seed=12)
    for path, text in zip(clean_paths, TRANSCRIPTS):
        path.with_suffix(".txt").write_text(text + "\n", encoding="utf-8")
    return clean_dir, noise_dir


@pytest.fixture
def small_manifest(tmp_path, corpus_dirs):
    """Manifest of 2 clean files x SNRs {-6, 6}."""
    clean_dir, noise_dir = corpus_dirs
    return synth_dataset(clean_dir, noise_dir, [-6, 6], seed=0, out_dir=tmp_path / "data")


@pytest.fixture
def python_cmd():
    """The running interpreter, quoted for an adapter template."""
    return shlex.quote(sys.executable)


@pytest.fixture
def echo_asr(python_cmd):
    """ASR template that prints a fixed hypothesis for any input."""
    return f"cmd:{python_cmd} -c \"print('hello world')\" {{in}}"
