import numpy as np
import pytest

from oabridge.audio_io import read_wav, write_wav
from oabridge.bridge import load_model, save_model
from oabridge.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, dispatch
from oabridge.dataset_synth import read_manifest


@pytest.fixture
def model_file(tmp_path, sample_model):
    path = tmp_path / "model.json"
    save_model(sample_model, path)
    return path


class TestUsage:
    """Test suite for argument handling."""

    @pytest.mark.parametrize("command", ["synth", "gen", "train", "predict", "process", "eval", "wer"])
    def test_help(self, command, capsys):
        """Test that --help exits 0 for every subcommand."""
        assert dispatch([command, "--help"]) == EXIT_OK
        assert "usage" in capsys.readouterr().out

    def test_no_arguments(self):
        """Test that a missing subcommand is a usage error."""
        assert dispatch([]) == EXIT_USAGE

    def test_unknown_flag(self):
        """Test that an unknown flag is a usage error."""
        assert dispatch(["wer", "--ref", "a", "--hyp", "b", "--colour"]) == EXIT_USAGE

    def test_missing_required_flag(self):
        """Test that a missing required flag is a usage error."""
        assert dispatch(["predict", "--model", "m.json"]) == EXIT_USAGE

    def test_bad_snr_list(self):
        """Test that a non-numeric SNR list is a usage error."""
        assert dispatch(["synth", "--clean-dir", "c", "--noise-dir", "n", "--snrs", "a,b", "--out-dir", "o"]) == EXIT_USAGE

    def test_bad_condition(self):
        """Test that an unknown ASR condition is a usage error."""
        argv = ["eval", "--model", "m", "--manifest", "x", "--se", "builtin:identity", "--report", "r",
                "--conditions", "reverb"]
        assert dispatch(argv) == EXIT_USAGE


class TestGenAndSynth:
    """Test suite for gen and synth."""

    def test_gen(self, tmp_path):
        """Test that gen writes a file of the requested duration."""
        out = tmp_path / "pink.wav"

        assert dispatch(["gen", "--kind", "pink", "--duration", "0.5", "--seed", "2", "--out", str(out)]) == EXIT_OK
        assert len(read_wav(out)) == 8000

    def test_synth_with_negative_snrs(self, tmp_path, corpus_dirs, capsys):
        """Test that --snrs accepts a leading negative value and writes the manifest."""
        clean_dir, noise_dir = corpus_dirs
        out_dir = tmp_path / "data"

        code = dispatch(["synth", "--clean-dir", str(clean_dir), "--noise-dir", str(noise_dir),
                         "--snrs", "-6,6", "--seed", "1", "--out-dir", str(out_dir)])

        assert code == EXIT_OK
        manifest = capsys.readouterr().out.strip()
        assert len(read_manifest(manifest)) == 4

    def test_synth_missing_dir(self, tmp_path):
        """Test that a missing input directory is a runtime error."""
        code = dispatch(["synth", "--clean-dir", str(tmp_path / "nope"), "--noise-dir", str(tmp_path),
                         "--snrs", "0", "--out-dir", str(tmp_path / "out")])

        assert code == EXIT_RUNTIME


class TestWer:
    """Test suite for the wer subcommand."""

    def write(self, path, rows):
        path.write_text("".join(f"{k}\t{v}\n" for k, v in rows), encoding="utf-8")
        return str(path)

    def test_identical(self, tmp_path, capsys):
        """Test that identical files score 0.0."""
        ref = self.write(tmp_path / "ref.txt", [("a", "the cat sat"), ("b", "on the mat")])

        assert dispatch(["wer", "--ref", ref, "--hyp", ref]) == EXIT_OK
        assert float(capsys.readouterr().out.strip()) == 0.0

    def test_details(self, tmp_path, capsys):
        """Test the pooled counts printed with --details."""
        ref = self.write(tmp_path / "ref.txt", [("a", "the cat sat")])
        hyp = self.write(tmp_path / "hyp.txt", [("a", "the bat sat on")])

        assert dispatch(["wer", "--ref", ref, "--hyp", hyp, "--details"]) == EXIT_OK
        wer_line, counts = capsys.readouterr().out.strip().splitlines()
        assert float(wer_line) == pytest.approx(2 / 3)
        assert counts == "S=1 D=0 I=1 N=3"

    def test_missing_hypothesis_scored_empty(self, tmp_path, capsys):
        """Test that a reference without a hypothesis counts as all deletions."""
        ref = self.write(tmp_path / "ref.txt", [("a", "one two"), ("b", "three four")])
        hyp = self.write(tmp_path / "hyp.txt", [("a", "one two")])

        assert dispatch(["wer", "--ref", ref, "--hyp", hyp]) == EXIT_OK
        assert float(capsys.readouterr().out.strip()) == 0.5

    def test_malformed_line(self, tmp_path):
        """Test that a line without a tab is a usage error."""
        ref = tmp_path / "ref.txt"
        ref.write_text("no tab here\n", encoding="utf-8")

        assert dispatch(["wer", "--ref", str(ref), "--hyp", str(ref)]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a runtime error."""
        assert dispatch(["wer", "--ref", str(tmp_path / "nope"), "--hyp", str(tmp_path / "nope")]) == EXIT_RUNTIME


class TestPredictAndProcess:
    """Test suite for predict and process."""

    def test_predict(self, tmp_path, model_file, speech, capsys):
        """Test that predict prints S and S' separated by a tab."""
        path = tmp_path / "x.wav"
        write_wav(speech, path)

        assert dispatch(["predict", "--model", str(model_file), "--noisy", str(path), "--enhanced", str(path)]) == EXIT_OK
        s, s_prime = (float(v) for v in capsys.readouterr().out.strip().split("\t"))
        assert s == pytest.approx(1.0, abs=1e-9)
        assert s_prime == pytest.approx(1.0, abs=1e-9)

    def test_predict_missing_model(self, tmp_path):
        """Test that a missing model file is a runtime error."""
        assert dispatch(["predict", "--model", str(tmp_path / "none.json"),
                         "--noisy", "a.wav", "--enhanced", "b.wav"]) == EXIT_RUNTIME

    def test_process_identity(self, tmp_path, model_file, speech):
        """Test that identity enhancement reproduces the input."""
        noisy = tmp_path / "in.wav"
        out = tmp_path / "out.wav"
        write_wav(speech, noisy)

        code = dispatch(["process", "--model", str(model_file), "--se", "builtin:identity",
                         "--in", str(noisy), "--out", str(out), "--workdir", str(tmp_path / "work")])

        assert code == EXIT_OK
        assert np.max(np.abs(read_wav(out).samples - read_wav(noisy).samples)) <= 1 / 32768

    def test_process_bad_adapter(self, tmp_path, model_file, speech):
        """Test that an unparseable adapter is a runtime error."""
        noisy = tmp_path / "in.wav"
        write_wav(speech, noisy)

        code = dispatch(["process", "--model", str(model_file), "--se", "magic",
                         "--in", str(noisy), "--out", str(tmp_path / "out.wav")])

        assert code == EXIT_RUNTIME


class TestTrainAndEval:
    """Test suite for train and eval."""

    def test_train(self, tmp_path, small_manifest):
        """Test that train writes a loadable model file."""
        out = tmp_path / "model.json"

        code = dispatch(["train", "--manifest", str(small_manifest), "--se", "builtin:specsub", "--out", str(out),
                         "--epochs", "5", "--batch", "4", "--crop-len", "8000",
                         "--workdir", str(tmp_path / "work")])

        assert code == EXIT_OK
        assert len(load_model(out).weights) == 4

    def test_train_mean_only(self, tmp_path, small_manifest):
        """Test that --features selects the pooled statistics."""
        out = tmp_path / "model.json"

        code = dispatch(["train", "--manifest", str(small_manifest), "--se", "builtin:identity", "--out", str(out),
                         "--epochs", "3", "--features", "mean", "--workdir", str(tmp_path / "work")])

        assert code == EXIT_OK
        assert load_model(out).feature_config.statistics == ["mean"]

    def test_eval(self, tmp_path, small_manifest, model_file, echo_asr):
        """Test that eval writes a report and a per-record dump."""
        report = tmp_path / "report.json"
        dump = tmp_path / "dump.jsonl"

        code = dispatch(["eval", "--model", str(model_file), "--manifest", str(small_manifest),
                         "--se", "builtin:oracle", "--asr", echo_asr, "--report", str(report),
                         "--dump", str(dump), "--jobs", "2", "--workdir", str(tmp_path / "work")])

        assert code == EXIT_OK
        assert '"wer"' in report.read_text()
        assert len(dump.read_text().splitlines()) == 4

    def test_eval_all_records_failed(self, tmp_path, small_manifest, model_file):
        """Test that a run where every record fails exits with a runtime error."""
        code = dispatch(["eval", "--model", str(model_file), "--manifest", str(small_manifest),
                         "--se", "cmd:false {in} {out}", "--report", str(tmp_path / "r.json"),
                         "--workdir", str(tmp_path / "work")])

        assert code == EXIT_RUNTIME
        assert (tmp_path / "r.json").exists()
