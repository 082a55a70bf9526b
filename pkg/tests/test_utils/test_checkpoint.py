# tests/test_utils/test_checkpoint.py
# Unit tests for the binary checkpoint format.

import struct

import numpy as np
import pytest

from core.errors import CheckpointFormatError
from utils.checkpoint import MAGIC, Checkpoint, load_checkpoint, save_checkpoint
from utils.corpus import build_vocab
from utils.model import LanguageModel, build_config


@pytest.fixture
def checkpoint():
    vocab = build_vocab("the cat sat on the mat\nthe dog\n", "word")
    model = LanguageModel.initialize(build_config(vocab.size, "mos", d=3, hidden_dim=4, K=2), 9)
    ckpt = Checkpoint.from_model(model, vocab, {"lr": 1.0, "epochs": 2}, np.random.default_rng(4))
    ckpt.extra["lowercase"] = False
    return ckpt


class TestCheckpoint:
    """Test suite for save_checkpoint / load_checkpoint."""

    def test_save_load_save_is_byte_identical(self, checkpoint, tmp_path):
        """Test that a loaded checkpoint re-saves to the same bytes."""
        first, second = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(checkpoint, first)
        save_checkpoint(load_checkpoint(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_contents_preserved(self, checkpoint, tmp_path):
        """Test config, vocabulary, tensors and extras after a round trip."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        loaded = load_checkpoint(path)
        assert loaded.model_config == checkpoint.model_config
        assert loaded.vocab == checkpoint.vocab
        assert loaded.train_config == {"lr": 1.0, "epochs": 2}
        assert loaded.rng_state == checkpoint.rng_state
        assert loaded.extra == {"lowercase": False}
        for name, value in checkpoint.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_model_predictions_preserved(self, checkpoint, tmp_path):
        """Test that the restored model predicts bitwise identically."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        a, b = checkpoint.to_model(), load_checkpoint(path).to_model()
        ids = np.array([[0, 1, 2, 3]])
        np.testing.assert_array_equal(a.log_probs(ids, a.initial_state(1))[0], b.log_probs(ids, b.initial_state(1))[0])

    def test_header_layout(self, checkpoint, tmp_path):
        """Test magic bytes and version field."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        data = path.read_bytes()
        assert data[:4] == MAGIC
        assert struct.unpack("<I", data[4:8]) == (1,)

    def test_corrupted_magic(self, checkpoint, tmp_path):
        """Test that bad magic bytes are a format error."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(CheckpointFormatError, match="magic"):
            load_checkpoint(path)

    def test_unsupported_version(self, checkpoint, tmp_path):
        """Test that an unknown version is a format error."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        data = path.read_bytes()
        path.write_bytes(data[:4] + struct.pack("<I", 7) + data[8:])
        with pytest.raises(CheckpointFormatError, match="version"):
            load_checkpoint(path)

    def test_truncated(self, checkpoint, tmp_path):
        """Test that a cut-off file is a format error at every truncation length tried."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        data = path.read_bytes()
        for cut in (6, 12, 40, len(data) - 3):
            path.write_bytes(data[:cut])
            with pytest.raises(CheckpointFormatError):
                load_checkpoint(path)

    def test_truncated_at_tensor_boundary(self, checkpoint, tmp_path):
        """Test that dropping the last whole tensor record is a format error, not a partial load."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        data = path.read_bytes()
        last = sorted(checkpoint.params)[-1]
        tensor = checkpoint.params[last]
        record = 2 + len(last.encode("utf-8")) + 4 + 8 * tensor.ndim + 8 * tensor.size
        path.write_bytes(data[:len(data) - record])
        with pytest.raises(CheckpointFormatError, match=last):
            load_checkpoint(path)

    def test_wrong_tensor_shape(self, checkpoint, tmp_path):
        """Test that a tensor whose shape disagrees with the model config is a format error."""
        name = sorted(checkpoint.params)[0]
        checkpoint.params[name] = np.zeros(checkpoint.params[name].size + 1)
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        with pytest.raises(CheckpointFormatError, match="shape"):
            load_checkpoint(path)

    def test_vocabulary_without_mode(self, checkpoint, tmp_path):
        """Test that a vocabulary entry with no vocab_mode is a format error."""
        path = tmp_path / "m.ckpt"
        save_checkpoint(checkpoint, path)
        data = path.read_bytes()
        (blob_len,) = struct.unpack("<Q", data[8:16])
        lines = data[16:16 + blob_len].decode("utf-8").split("\n")
        blob = "\n".join(line for line in lines if not line.startswith("vocab_mode=")).encode("utf-8")
        path.write_bytes(data[:8] + struct.pack("<Q", len(blob)) + blob + data[16 + blob_len:])
        with pytest.raises(CheckpointFormatError, match="vocabulary"):
            load_checkpoint(path)

    def test_missing_file_names_path(self, tmp_path):
        """Test that a missing checkpoint reports its path."""
        with pytest.raises(FileNotFoundError, match="missing.ckpt"):
            load_checkpoint(tmp_path / "missing.ckpt")
