# utils/model.py
# Encoder + output head composed into a language model with optional weight tying.

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from core.errors import ContractViolation
from . import encoder, heads
from .encoder import EncoderConfig, HiddenState
from .heads import HeadConfig

logger = logging.getLogger(__name__)

HEAD_PREFIX = "head."


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig
    head: HeadConfig
    tie_weights: bool | None = None  # None: tie when embed_dim == head d

    @property
    def tied(self) -> bool:
        if self.tie_weights is None:
            return self.encoder.embed_dim == self.head.d
        return bool(self.tie_weights)

    def validate(self) -> "ModelConfig":
        self.encoder.validate()
        self.head.validate()
        if self.head.vocab_size != self.encoder.vocab_size:
            raise ContractViolation("Encoder and head disagree on the vocabulary size.")
        if self.head.d_g != self.encoder.hidden_dim:
            raise ContractViolation(f"Head d_g={self.head.d_g} must equal encoder hidden_dim={self.encoder.hidden_dim}.")
        if self.tied and self.encoder.embed_dim != self.head.d:
            raise ContractViolation("Weight tying needs embed_dim == head d.")
        return self

    def to_dict(self) -> dict:
        return {"encoder": self.encoder.to_dict(), "head": self.head.to_dict(), "tie_weights": self.tie_weights}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig.from_dict(data["encoder"]),
            head=HeadConfig.from_dict(data["head"]),
            tie_weights=data.get("tie_weights"),
        ).validate()


def build_config(vocab_size: int, head: str, d: int, hidden_dim: int, K: int = 1, embed_dim: int | None = None,
                 num_layers: int = 1, output_bias: bool = True, mixture_bias: bool = True,
                 projection: str = "auto", tie_weights: bool | None = None) -> ModelConfig:
    """Convenience constructor; embed_dim defaults to d so that the auto tying rule applies."""
    enc = EncoderConfig(vocab_size, embed_dim or d, hidden_dim, num_layers)
    hcfg = HeadConfig(head, vocab_size, d, hidden_dim, K if head != "softmax" else 1,
                      output_bias, mixture_bias, projection)
    return ModelConfig(enc, hcfg, tie_weights).validate()


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes = dict(encoder.param_shapes(cfg.encoder))
    for name, shape in heads.param_shapes(cfg.head).items():
        if cfg.tied and name == "W":
            continue
        shapes[HEAD_PREFIX + name] = shape
    return shapes


def count_params(cfg: ModelConfig) -> int:
    """Exact learnable scalar count; a tied output matrix is counted once."""
    return int(sum(np.prod(shape) for shape in param_shapes(cfg).values()))


class LanguageModel:
    """Parameters plus the forward/backward plumbing for one (encoder, head) pair."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        self.config = cfg.validate()
        expected = param_shapes(cfg)
        if set(params) != set(expected):
            raise ContractViolation(f"Parameter names {sorted(params)} do not match {sorted(expected)}.")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ContractViolation(f"Parameter {name} has shape {params[name].shape}, expected {shape}.")
        self.params = params

    @classmethod
    def initialize(cls, cfg: ModelConfig, seed: int | np.random.Generator) -> "LanguageModel":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        params = encoder.init_params(cfg.encoder, rng)
        for name, value in heads.init_head_params(cfg.head, rng).items():
            if cfg.tied and name == "W":
                continue
            params[HEAD_PREFIX + name] = value
        return cls(cfg, params)

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "LanguageModel":
        """All-zero parameters: the uniform model, P(x|c) = 1/M everywhere."""
        return cls(cfg, {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()})

    @property
    def vocab_size(self) -> int:
        return self.config.encoder.vocab_size

    def head_params(self) -> dict[str, np.ndarray]:
        hp = {name[len(HEAD_PREFIX):]: value for name, value in self.params.items() if name.startswith(HEAD_PREFIX)}
        if self.config.tied:
            hp["W"] = self.params["embedding"]
        return hp

    def initial_state(self, batch_size: int) -> HiddenState:
        return HiddenState.zeros(self.config.encoder, batch_size)

    def log_probs(self, inputs: np.ndarray, state: HiddenState) -> tuple[np.ndarray, HiddenState]:
        """Next-token log-distributions for a B x L window: B x L x M."""
        g, new_state, _ = encoder.forward(self.params, self.config.encoder, inputs, state)
        B, L, H = g.shape
        logp = heads.head_forward(g.reshape(B * L, H), self.head_params(), self.config.head)
        return logp.reshape(B, L, -1), new_state

    def loss_and_grads(self, inputs: np.ndarray, targets: np.ndarray,
                       state: HiddenState) -> tuple[float, dict[str, np.ndarray], HiddenState]:
        """Mean NLL over the B x L targets and its exact gradient."""
        targets = np.asarray(targets)
        if targets.shape != np.shape(inputs):
            raise ContractViolation(f"Targets shape {targets.shape} does not match inputs {np.shape(inputs)}.")
        g, new_state, tape = encoder.forward(self.params, self.config.encoder, inputs, state)
        B, L, H = g.shape
        n = B * L
        weights = np.full(n, 1.0 / n)
        head_grads, grad_g, nll = heads.head_backward(
            self.config.head.kind, g.reshape(n, H), self.head_params(), self.config.head,
            targets.reshape(n), weights)
        grads, _ = encoder.backward(self.params, self.config.encoder, tape, grad_g.reshape(B, L, H))
        for name, value in head_grads.items():
            if self.config.tied and name == "W":
                grads["embedding"] += value
            else:
                grads[HEAD_PREFIX + name] = value
        return float(nll.mean()), grads, new_state

    def stream_log_probs(self, ids: np.ndarray, chunk: int = 64) -> Iterator[np.ndarray]:
        """
        Yields (chunk x M) blocks of log P(x_{t+1} | x_{<=t}) for t = 0..T-2,
        with B = 1 state carried through the whole stream.
        """
        ids = np.asarray(ids, dtype=np.int64)
        state = self.initial_state(1)
        inputs = ids[:-1]
        for start in range(0, inputs.size, chunk):
            logp, state = self.log_probs(inputs[None, start:start + chunk], state)
            yield logp[0]

    def copy(self) -> "LanguageModel":
        return LanguageModel(self.config, {k: v.copy() for k, v in self.params.items()})
