# utils/encoder.py
# Input embedding plus a stacked LSTM, with exact backpropagation through time.

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from core import config
from core.errors import ContractViolation

logger = logging.getLogger(__name__)

# Gate blocks inside the 4*hidden pre-activation, in this order.
GATES = ("input", "forget", "cell", "output")


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    embed_dim: int
    hidden_dim: int
    num_layers: int = 1

    def validate(self) -> "EncoderConfig":
        for name, value in asdict(self).items():
            if int(value) < 1:
                raise ContractViolation(f"EncoderConfig.{name} must be positive, got {value}.")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        return cls(**{k: int(v) for k, v in data.items()}).validate()


@dataclass
class HiddenState:
    """Per-layer hidden and cell vectors, each shaped (num_layers, B, hidden_dim)."""
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, cfg: EncoderConfig, batch_size: int) -> "HiddenState":
        shape = (cfg.num_layers, batch_size, cfg.hidden_dim)
        return cls(np.zeros(shape), np.zeros(shape))

    def copy(self) -> "HiddenState":
        return HiddenState(self.h.copy(), self.c.copy())


@dataclass
class EncoderTape:
    """Everything backward needs from a forward pass."""
    input_ids: np.ndarray
    initial: HiddenState
    layers: list[dict[str, np.ndarray]] = field(default_factory=list)


def layer_keys(layer: int) -> tuple[str, str, str]:
    return f"lstm.{layer}.w_ih", f"lstm.{layer}.w_hh", f"lstm.{layer}.bias"


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, ...]]:
    shapes = {"embedding": (cfg.vocab_size, cfg.embed_dim)}
    H = cfg.hidden_dim
    for layer in range(cfg.num_layers):
        in_dim = cfg.embed_dim if layer == 0 else H
        w_ih, w_hh, bias = layer_keys(layer)
        shapes[w_ih] = (4 * H, in_dim)
        shapes[w_hh] = (4 * H, H)
        shapes[bias] = (4 * H,)
    return shapes


def init_params(cfg: EncoderConfig, rng_seed: int | np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-0.1, 0.1) weights; forget-gate bias 1.0, other biases 0."""
    cfg.validate()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    params = {}
    H = cfg.hidden_dim
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".bias"):
            bias = np.zeros(shape)
            bias[H:2 * H] = config.FORGET_BIAS
            params[name] = bias
        else:
            params[name] = rng.uniform(-config.INIT_RANGE, config.INIT_RANGE, size=shape)
    return params


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _check_inputs(params: dict, cfg: EncoderConfig, input_ids: np.ndarray, state: HiddenState) -> np.ndarray:
    ids = np.asarray(input_ids)
    if ids.ndim != 2:
        raise ContractViolation(f"input_ids must be B x L, got shape {ids.shape}.")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise ContractViolation(f"Token id out of range for vocabulary of size {cfg.vocab_size}.")
    expected = (cfg.num_layers, ids.shape[0], cfg.hidden_dim)
    if state.h.shape != expected or state.c.shape != expected:
        raise ContractViolation(f"Hidden state shape {state.h.shape} does not match {expected}.")
    for name, shape in param_shapes(cfg).items():
        if params[name].shape != shape:
            raise ContractViolation(f"Parameter {name} has shape {params[name].shape}, expected {shape}.")
    return ids


def forward(params: dict[str, np.ndarray], cfg: EncoderConfig, input_ids: np.ndarray,
            state: HiddenState) -> tuple[np.ndarray, HiddenState, EncoderTape]:
    """
    Runs the stacked LSTM over a B x L window.
    Returns the top layer's hidden sequence g (B x L x hidden), the carried final state
    and the tape for backward.
    """
    ids = _check_inputs(params, cfg, input_ids, state)
    B, L = ids.shape
    H = cfg.hidden_dim
    tape = EncoderTape(input_ids=ids, initial=state.copy())
    new_state = HiddenState(np.empty_like(state.h), np.empty_like(state.c))

    x = params["embedding"][ids]
    for layer in range(cfg.num_layers):
        w_ih, w_hh, bias = (params[k] for k in layer_keys(layer))
        h, c = state.h[layer], state.c[layer]
        # input projections for all steps at once
        zx = x @ w_ih.T + bias
        gates = np.empty((B, L, 4 * H))
        cells = np.empty((B, L, H))
        hs = np.empty((B, L, H))
        h_prev = np.empty((B, L, H))
        c_prev = np.empty((B, L, H))
        for t in range(L):
            h_prev[:, t], c_prev[:, t] = h, c
            z = zx[:, t] + h @ w_hh.T
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            gates[:, t] = np.concatenate([i, f, g, o], axis=1)
            cells[:, t], hs[:, t] = c, h
        new_state.h[layer], new_state.c[layer] = h, c
        tape.layers.append({"x": x, "gates": gates, "c": cells, "h_prev": h_prev, "c_prev": c_prev})
        x = hs
    return x, new_state, tape


def backward(params: dict[str, np.ndarray], cfg: EncoderConfig, tape: EncoderTape, grad_g: np.ndarray,
             grad_final: HiddenState | None = None) -> tuple[dict[str, np.ndarray], HiddenState]:
    """
    Exact gradients of <grad_g, g> (+ <grad_final, final state> when given) with respect
    to every parameter and to the incoming state.
    """
    ids = tape.input_ids
    B, L = ids.shape
    H = cfg.hidden_dim
    if len(tape.layers) != cfg.num_layers:
        raise ContractViolation("Tape was recorded for a different number of layers.")
    grad_g = np.asarray(grad_g, dtype=np.float64)
    if grad_g.shape != (B, L, H):
        raise ContractViolation(f"grad_g has shape {grad_g.shape}, expected {(B, L, H)}.")

    grads = {name: np.zeros(shape) for name, shape in param_shapes(cfg).items()}
    grad_state = HiddenState.zeros(cfg, B)
    dh_out = grad_g
    for layer in reversed(range(cfg.num_layers)):
        rec = tape.layers[layer]
        w_ih_key, w_hh_key, bias_key = layer_keys(layer)
        w_ih, w_hh = params[w_ih_key], params[w_hh_key]
        gates, cells = rec["gates"], rec["c"]
        dh_next = grad_final.h[layer].copy() if grad_final is not None else np.zeros((B, H))
        dc_next = grad_final.c[layer].copy() if grad_final is not None else np.zeros((B, H))
        dz_all = np.empty((B, L, 4 * H))
        for t in reversed(range(L)):
            i, f, g, o = (gates[:, t, k * H:(k + 1) * H] for k in range(4))
            tanh_c = np.tanh(cells[:, t])
            dh = dh_out[:, t] + dh_next
            dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
            dz = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * rec["c_prev"][:, t] * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                dh * tanh_c * o * (1.0 - o),
            ], axis=1)
            dz_all[:, t] = dz
            dc_next = dc * f
            dh_next = dz @ w_hh
        flat_dz = dz_all.reshape(B * L, 4 * H)
        grads[w_ih_key] += flat_dz.T @ rec["x"].reshape(B * L, -1)
        grads[w_hh_key] += flat_dz.T @ rec["h_prev"].reshape(B * L, H)
        grads[bias_key] += flat_dz.sum(axis=0)
        grad_state.h[layer], grad_state.c[layer] = dh_next, dc_next
        dh_out = dz_all @ w_ih
    np.add.at(grads["embedding"], ids, dh_out)
    return grads, grad_state
