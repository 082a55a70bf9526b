# utils/heads.py
# Softmax, Mixture of Softmaxes and Mixture of Contexts output heads.
# All functions accept a single context vector (d_g,) or a batch (N x d_g).

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from core import config
from core.errors import ContractViolation
from .linalg import log_softmax, lse_rows, softmax

logger = logging.getLogger(__name__)

HEAD_KINDS = ("softmax", "moc", "mos")
PROJECTIONS = ("auto", "identity", "linear", "tanh")


@dataclass(frozen=True)
class HeadConfig:
    """
    kind: softmax | moc | mos
    d: word embedding size, d_g: encoder output width, K: mixture components
    projection (softmax only): auto picks identity when d == d_g, linear otherwise
    """
    kind: str
    vocab_size: int
    d: int
    d_g: int
    K: int = 1
    output_bias: bool = True
    mixture_bias: bool = True
    projection: str = "auto"

    def validate(self) -> "HeadConfig":
        if self.kind not in HEAD_KINDS:
            raise ContractViolation(f"Unknown head kind {self.kind!r}; expected one of {HEAD_KINDS}.")
        if min(self.vocab_size, self.d, self.d_g, self.K) < 1:
            raise ContractViolation(f"Head dimensions must be positive: {self}")
        if self.projection not in PROJECTIONS:
            raise ContractViolation(f"Unknown projection {self.projection!r}.")
        if self.kind == "softmax" and self.resolved_projection == "identity" and self.d != self.d_g:
            raise ContractViolation(f"Identity projection needs d == d_g, got d={self.d}, d_g={self.d_g}.")
        return self

    @property
    def resolved_projection(self) -> str:
        if self.projection != "auto":
            return self.projection
        return "identity" if self.d == self.d_g else "linear"

    @property
    def components(self) -> int:
        return 1 if self.kind == "softmax" else self.K

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HeadConfig":
        return cls(**data).validate()


def param_shapes(cfg: HeadConfig) -> dict[str, tuple[int, ...]]:
    M, d, d_g, K = cfg.vocab_size, cfg.d, cfg.d_g, cfg.K
    shapes = {"W": (M, d)}
    if cfg.kind == "softmax":
        if cfg.output_bias:
            shapes["bias"] = (M,)
        if cfg.resolved_projection != "identity":
            shapes["P"] = (d, d_g)
        if cfg.resolved_projection == "tanh" and cfg.mixture_bias:
            shapes["b_P"] = (d,)
        return shapes
    shapes["W_h"] = (K, d, d_g)
    shapes["w_pi"] = (K, d_g)
    if cfg.mixture_bias:
        shapes["b_h"] = (K, d)
        shapes["b_pi"] = (K,)
    return shapes


def count_head_params(cfg: HeadConfig) -> int:
    return int(sum(np.prod(shape) for shape in param_shapes(cfg).values()))


def rank_bound(cfg: HeadConfig) -> int | None:
    """Provable upper bound on the log-prob matrix rank; None for MoS (no bound)."""
    if cfg.kind == "mos":
        return None
    extra = 1 if cfg.kind == "softmax" and cfg.output_bias else 0
    return cfg.d + 1 + extra


def init_head_params(cfg: HeadConfig, rng: int | np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform(-0.1, 0.1) weights, zero biases."""
    cfg.validate()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.uniform(-config.INIT_RANGE, config.INIT_RANGE, size=shape)
    return params


def _as_batch(g) -> tuple[np.ndarray, bool]:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 1:
        return g[None, :], True
    if g.ndim != 2:
        raise ContractViolation(f"Context must be a vector or an N x d_g matrix, got shape {g.shape}.")
    return g, False


def _check(cfg: HeadConfig, params: dict, g: np.ndarray) -> None:
    if g.shape[1] != cfg.d_g:
        raise ContractViolation(f"Context width {g.shape[1]} does not match d_g={cfg.d_g}.")
    for name, shape in param_shapes(cfg).items():
        if name not in params:
            raise ContractViolation(f"Missing head parameter {name!r}.")
        if params[name].shape != shape:
            raise ContractViolation(f"Head parameter {name} has shape {params[name].shape}, expected {shape}.")


def _unbatch(x: np.ndarray, single: bool) -> np.ndarray:
    return x[0] if single else x


# --- Softmax ---

def softmax_context(g: np.ndarray, params: dict, cfg: HeadConfig) -> np.ndarray:
    proj = cfg.resolved_projection
    if proj == "identity":
        return g
    pre = g @ params["P"].T
    if proj == "tanh":
        if "b_P" in params:
            pre = pre + params["b_P"]
        return np.tanh(pre)
    return pre


def logits_log_softmax(h: np.ndarray, W: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Shared final step of every single-softmax head: log_softmax(h W^T + bias)."""
    logits = h @ W.T
    if bias is not None:
        logits = logits + bias
    return log_softmax(logits, axis=-1)


def softmax_forward(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    """log P(.|c) = log_softmax(W h + bias), h = P g, tanh(P g + b_P) or g."""
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    h = softmax_context(batch, params, cfg)
    return _unbatch(logits_log_softmax(h, params["W"], params.get("bias")), single)


# --- Mixtures ---

def _prior_logits(g: np.ndarray, params: dict) -> np.ndarray:
    s = g @ params["w_pi"].T
    if "b_pi" in params:
        s = s + params["b_pi"]
    return s


def mixture_priors(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    """pi_k = softmax_k(<w_pi[k], g> + b_pi[k])."""
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    return _unbatch(softmax(_prior_logits(batch, params), axis=-1), single)


def _contexts(g: np.ndarray, params: dict) -> np.ndarray:
    pre = np.einsum("kdg,ng->nkd", params["W_h"], g)
    if "b_h" in params:
        pre = pre + params["b_h"]
    return np.tanh(pre)


def mixture_contexts(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    """h[k] = tanh(W_h[k] g + b_h[k]); K x d for one context, N x K x d for a batch."""
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    return _unbatch(_contexts(batch, params), single)


def mos_forward(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    """log P(x) = LSE_k[log pi_k + log_softmax(W h_k)_x], entirely in log space."""
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    log_pi = log_softmax(_prior_logits(batch, params), axis=-1)
    comp = log_softmax(_contexts(batch, params) @ params["W"].T, axis=-1)
    out = lse_rows(log_pi[:, :, None] + comp, axis=1)[:, 0, :]
    return _unbatch(out, single)


def mixed_context(g: np.ndarray, params: dict) -> np.ndarray:
    """h' = sum_k pi_k h_k."""
    pi = softmax(_prior_logits(g, params), axis=-1)
    return np.einsum("nk,nkd->nd", pi, _contexts(g, params))


def moc_forward(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    """A single softmax over the prior-weighted mixture of contexts."""
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    return _unbatch(logits_log_softmax(mixed_context(batch, params), params["W"]), single)


_FORWARDS = {"softmax": softmax_forward, "moc": moc_forward, "mos": mos_forward}


def head_forward(g, params: dict, cfg: HeadConfig) -> np.ndarray:
    return _FORWARDS[cfg.kind](g, params, cfg)


# --- Gradients ---

def _check_targets(targets, n: int, cfg: HeadConfig) -> np.ndarray:
    y = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if y.shape != (n,):
        raise ContractViolation(f"Expected {n} targets, got shape {y.shape}.")
    if y.min() < 0 or y.max() >= cfg.vocab_size:
        raise ContractViolation(f"Target id out of range for vocabulary of size {cfg.vocab_size}.")
    return y


def _mixture_input_grads(g, params, d_pre_h, d_prior_logits, grads) -> np.ndarray:
    """Back-propagates through the context projections and the priors."""
    grads["W_h"] = np.einsum("nkd,ng->kdg", d_pre_h, g)
    grads["w_pi"] = d_prior_logits.T @ g
    if "b_h" in params:
        grads["b_h"] = d_pre_h.sum(axis=0)
        grads["b_pi"] = d_prior_logits.sum(axis=0)
    return np.einsum("nkd,kdg->ng", d_pre_h, params["W_h"]) + d_prior_logits @ params["w_pi"]


def head_backward(kind: str, g, params: dict, cfg: HeadConfig, targets,
                  weights: np.ndarray | None = None) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """
    Exact gradients of sum_n weights[n] * -log P(targets[n] | g[n]).
    Returns (param grads, grad_g, per-row NLL).
    """
    if kind != cfg.kind:
        raise ContractViolation(f"Head kind {kind!r} does not match config kind {cfg.kind!r}.")
    batch, single = _as_batch(g)
    _check(cfg, params, batch)
    n = batch.shape[0]
    y = _check_targets(targets, n, cfg)
    wts = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    rows = np.arange(n)
    W = params["W"]
    grads: dict[str, np.ndarray] = {}

    if kind == "softmax":
        proj = cfg.resolved_projection
        h = softmax_context(batch, params, cfg)
        logp = logits_log_softmax(h, W, params.get("bias"))
        nll = -logp[rows, y]
        d_logits = np.exp(logp)
        d_logits[rows, y] -= 1.0
        d_logits *= wts[:, None]
        grads["W"] = d_logits.T @ h
        if "bias" in params:
            grads["bias"] = d_logits.sum(axis=0)
        dh = d_logits @ W
        if proj == "identity":
            grad_g = dh
        else:
            if proj == "tanh":
                dh = dh * (1.0 - h * h)
                if "b_P" in params:
                    grads["b_P"] = dh.sum(axis=0)
            grads["P"] = dh.T @ batch
            grad_g = dh @ params["P"]

    elif kind == "mos":
        log_pi = log_softmax(_prior_logits(batch, params), axis=-1)
        h = _contexts(batch, params)
        comp = log_softmax(h @ W.T, axis=-1)                   # N x K x M
        joint = log_pi + comp[rows, :, y]                        # N x K
        log_p = lse_rows(joint, axis=1)[:, 0]
        nll = -log_p
        resp = np.exp(joint - log_p[:, None]) * wts[:, None]     # posterior over components
        d_logits = np.exp(comp) * resp[:, :, None]
        d_logits[rows, :, y] -= resp
        grads["W"] = np.einsum("nkm,nkd->md", d_logits, h)
        d_pre_h = (d_logits @ W) * (1.0 - h * h)
        d_prior_logits = np.exp(log_pi) * wts[:, None] - resp
        grad_g = _mixture_input_grads(batch, params, d_pre_h, d_prior_logits, grads)

    else:
        pi = softmax(_prior_logits(batch, params), axis=-1)
        h = _contexts(batch, params)
        mixed = np.einsum("nk,nkd->nd", pi, h)
        logp = logits_log_softmax(mixed, W)
        nll = -logp[rows, y]
        d_logits = np.exp(logp)
        d_logits[rows, y] -= 1.0
        d_logits *= wts[:, None]
        grads["W"] = d_logits.T @ mixed
        d_mixed = d_logits @ W
        d_pi = np.einsum("nd,nkd->nk", d_mixed, h)
        d_prior_logits = pi * (d_pi - (pi * d_pi).sum(axis=1, keepdims=True))
        d_pre_h = pi[:, :, None] * d_mixed[:, None, :] * (1.0 - h * h)
        grad_g = _mixture_input_grads(batch, params, d_pre_h, d_prior_logits, grads)

    return grads, _unbatch(grad_g, single), nll


# --- Explicit context matrices ---

def mos_logprob_matrix(H_list, priors, W) -> np.ndarray:
    """A_MoS = log sum_k priors[:, k] * softmax(H_k W^T), rows normalised."""
    priors = np.asarray(priors, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    H = np.stack([np.asarray(h, dtype=np.float64) for h in H_list])
    K, N, d = H.shape
    if priors.shape != (N, K):
        raise ContractViolation(f"Priors have shape {priors.shape}, expected {(N, K)}.")
    if W.ndim != 2 or W.shape[1] != d:
        raise ContractViolation(f"W has shape {W.shape}, expected (M, {d}).")
    if np.any(priors < 0) or not np.allclose(priors.sum(axis=1), 1.0, rtol=0.0, atol=1e-9):
        raise ContractViolation("Every prior row must be non-negative and sum to 1 within 1e-9.")
    comp = log_softmax(H @ W.T, axis=-1)                         # K x N x M
    with np.errstate(divide="ignore"):
        log_pi = np.log(priors).T[:, :, None]
    return lse_rows(log_pi + comp, axis=0)[0]
