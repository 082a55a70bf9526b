# tests/test_utils/test_training.py
# Unit tests for the training loop, evaluation and capacity matching.

import math

import numpy as np
import pytest

from core.errors import ContractViolation, TrainingFailure
from utils import training
from utils.checkpoint import Checkpoint
from utils.corpus import TokenStream, Vocabulary, build_vocab, encode, load_corpus
from utils.model import LanguageModel, build_config
from utils.optim import SGD, global_norm
from utils.training import (
    EpochMetrics, EvalResult, TrainConfig, capacity_matched_configs, count_params, evaluate,
    match_capacity, train,
)


@pytest.fixture
def ptb(ptb_dir):
    return load_corpus(ptb_dir, "word")


def _small_config(vocab_size, kind="softmax", **overrides):
    model = build_config(vocab_size, kind, d=8, hidden_dim=12, K=2)
    settings = dict(optimizer="sgd", lr=1.0, epochs=2, batch_size=10, bptt_len=10, seed=3)
    settings.update(overrides)
    return TrainConfig(model, **settings)


class TestEvaluate:
    """Test suite for perplexity evaluation."""

    def test_uniform_model_perplexity_is_m(self, ptb):
        """Test that the zero model scores ppl = M and nll = ln M."""
        vocab, splits = ptb
        model = LanguageModel.zeros(build_config(vocab.size, "softmax", d=4, hidden_dim=4))
        result = evaluate(model, splits["test"])
        assert result.mean_nll == pytest.approx(math.log(vocab.size), abs=1e-6)
        assert result.ppl == pytest.approx(vocab.size, rel=1e-6)
        assert result.tokens == len(splits["test"]) - 1

    def test_bpc_and_ppl_relations(self):
        """Test ppl = exp(nll) and bpc = nll / ln 2."""
        result = EvalResult(mean_nll=1.3, tokens=10)
        assert result.ppl == pytest.approx(math.exp(1.3), rel=1e-12)
        assert result.bpc == pytest.approx(1.3 / math.log(2), rel=1e-12)

    def test_vocabulary_mismatch(self, ptb):
        """Test that a stream from another vocabulary is rejected."""
        vocab, splits = ptb
        model = LanguageModel.zeros(build_config(vocab.size, "softmax", d=4, hidden_dim=4))
        with pytest.raises(ContractViolation):
            evaluate(model, encode("a b\n", build_vocab("a b\n", "word")))
        stream = encode("the company\n", vocab)
        evaluate(Checkpoint.from_model(model, vocab), stream, vocab)
        reordered = Vocabulary(tuple(reversed(vocab.id_to_token)), "word")
        with pytest.raises(ContractViolation):
            evaluate(Checkpoint.from_model(model, reordered), stream, vocab)

    def test_non_finite_metrics_rejected(self):
        """Test that epoch metrics must be finite."""
        with pytest.raises(ContractViolation):
            EpochMetrics(1, float("nan"), 1.0, 0.0)


class TestTrain:
    """Test suite for the training loop."""

    def test_zero_learning_rate_keeps_everything_fixed(self, ptb):
        """Test lr = 0: parameters unchanged and metrics constant across epochs."""
        vocab, splits = ptb
        cfg = _small_config(vocab.size, "mos", lr=0.0)
        result = train(splits, cfg, vocab)
        initial = LanguageModel.initialize(cfg.model, np.random.default_rng(cfg.seed))
        for name, value in initial.params.items():
            np.testing.assert_array_equal(result.checkpoint.params[name], value)
        assert len({m.valid_nll for m in result.metrics}) == 1
        for m in result.metrics:
            assert m.train_nll == pytest.approx(result.metrics[0].train_nll, rel=1e-12)

    def test_same_seed_same_metrics(self, ptb):
        """Test bit-reproducible metric sequences."""
        vocab, splits = ptb
        cfg = _small_config(vocab.size, epochs=1)
        a, b = train(splits, cfg, vocab), train(splits, cfg, vocab)
        assert [(m.train_nll, m.valid_nll) for m in a.metrics] == [(m.train_nll, m.valid_nll) for m in b.metrics]

    def test_training_lowers_validation_nll(self, ptb):
        """Test that two SGD epochs beat the untrained model."""
        vocab, splits = ptb
        result = train(splits, _small_config(vocab.size), vocab)
        assert [m.epoch for m in result.metrics] == [0, 1, 2]
        assert result.metrics[-1].valid_nll < result.metrics[0].valid_nll
        assert {"test_nll", "test_ppl", "gap"} <= set(result.summary)

    def test_callbacks(self, ptb):
        """Test the per-epoch and per-step hooks."""
        vocab, splits = ptb
        epochs, steps = [], []
        train(splits, _small_config(vocab.size, epochs=1), vocab,
              on_epoch=epochs.append, on_step=lambda step, norm: steps.append((step, norm)))
        assert [m.epoch for m in epochs] == [0, 1]
        assert [s for s, _ in steps] == list(range(len(steps)))
        assert all(n >= 0 for _, n in steps)

    def test_divergence_raises_with_step(self, ptb):
        """Test that a non-finite loss raises TrainingFailure carrying the step index."""
        vocab, splits = ptb
        cfg = _small_config(vocab.size, lr=float("inf"), grad_clip=0.0, epochs=1)
        with np.errstate(all="ignore"), pytest.raises(TrainingFailure) as info:
            train(splits, cfg, vocab)
        assert info.value.step == 1

    def test_divergence_on_last_window_raises_with_step(self):
        """Test that parameters blown up by the final update fail validation with TrainingFailure."""
        stream = TokenStream(np.array([0, 1, 2, 3, 1, 2, 3, 0]), 4)
        model = build_config(4, "softmax", d=2, hidden_dim=3)
        cfg = TrainConfig(model, optimizer="sgd", lr=float("inf"), grad_clip=0.0, epochs=1, batch_size=2, bptt_len=3)
        with np.errstate(all="ignore"), pytest.raises(TrainingFailure) as info:
            train({"train": stream, "valid": stream}, cfg)
        assert info.value.step == 1
        assert not math.isfinite(info.value.value)

    def test_clipped_norm_at_every_step(self, ptb, monkeypatch):
        """Test that the optimizer never sees a gradient with global norm above grad_clip."""
        seen = []

        class RecordingSGD(SGD):
            def step(self, params, grads):
                seen.append(global_norm(grads))
                super().step(params, grads)

        monkeypatch.setattr(training, "make_optimizer", lambda name, lr: RecordingSGD(lr))
        vocab, splits = ptb
        pre_clip = []
        train(splits, _small_config(vocab.size, grad_clip=0.01, epochs=1), vocab,
              on_step=lambda step, norm: pre_clip.append(norm))
        assert len(seen) == len(pre_clip) > 0
        assert max(pre_clip) > 0.01
        assert max(seen) <= 0.01 + 1e-9

    def test_missing_split(self, ptb):
        """Test that train needs train and valid splits."""
        vocab, splits = ptb
        with pytest.raises(ContractViolation):
            train({"train": splits["train"]}, _small_config(vocab.size), vocab)

    def test_config_round_trip(self):
        """Test TrainConfig serialisation."""
        cfg = _small_config(50, "moc", optimizer="adam", lr=1e-3)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestCapacity:
    """Test suite for parameter counting and capacity matching."""

    def test_count_matches_checkpoint_scalars(self):
        """Test that count_params equals the number of stored scalars."""
        cfg = build_config(30, "mos", d=5, hidden_dim=7, K=3)
        model = LanguageModel.initialize(cfg, 0)
        assert count_params(cfg) == sum(v.size for v in model.params.values())

    def test_matching_by_hidden_size(self):
        """Test that d = 16, K = 4 mixtures can be matched to Softmax within 2%."""
        softmax = build_config(131, "softmax", d=16, hidden_dim=64)
        configs = capacity_matched_configs(softmax, K=4, knob="hidden")
        target = count_params(softmax)
        for kind, cfg in configs.items():
            assert cfg.head.kind == kind
            assert cfg.head.d == 16
            assert abs(count_params(cfg) - target) / target <= 0.02

    def test_matching_by_d(self):
        """Test the default knob keeps the encoder and moves d."""
        softmax = build_config(131, "softmax", d=32, hidden_dim=32)
        mos = match_capacity(softmax, "mos", 4)
        assert mos.encoder.hidden_dim == 32
        assert abs(count_params(mos) - count_params(softmax)) / count_params(softmax) <= 0.02

    def test_unknown_knob(self):
        """Test that only d and hidden can be matched."""
        with pytest.raises(ContractViolation):
            match_capacity(build_config(20, "softmax", 4, 4), "mos", 2, knob="layers")
