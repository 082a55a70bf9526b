# utils/synthetic.py
# Ground-truth languages with controlled rank, and direct KL fitting of Softmax / MoC / MoS
# parameterisations to them.

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from core import config
from core.errors import ContractViolation, FittingFailure
from .heads import HEAD_KINDS
from .linalg import log_softmax, lse_rows, numerical_rank, softmax, svd_values
from .optim import Adam

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("head", "d", "K", "restarts", "final_kl", "rank", "iters", "seed")


@dataclass(frozen=True)
class SyntheticLanguage:
    """N contexts x M tokens of true log-probabilities (rows normalised, all P* > 0)."""
    A: np.ndarray
    rank_param: int
    seed: int
    scale: float = config.LANGUAGE_SCALE

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class FitConfig:
    lr: float = config.FIT_LR
    iterations: int = config.FIT_ITERATIONS
    restarts: int = config.FIT_RESTARTS
    log_every: int = config.FIT_LOG_EVERY
    init_range: float = config.INIT_RANGE
    lr_final: float = config.FIT_LR_FINAL

    def validate(self) -> "FitConfig":
        if self.lr <= 0 or self.iterations < 1 or self.restarts < 1 or self.log_every < 1:
            raise ContractViolation(f"Invalid fit config: {self}")
        if not 0.0 < self.lr_final <= 1.0:
            raise ContractViolation(f"lr_final must lie in (0, 1], got {self.lr_final}.")
        return self

    def lr_at(self, step: int) -> float:
        """Cosine schedule from lr at step 0 down to lr * lr_final at the last iteration."""
        progress = min(step / max(self.iterations - 1, 1), 1.0)
        return self.lr * (self.lr_final + (1.0 - self.lr_final) * 0.5 * (1.0 + math.cos(math.pi * progress)))


@dataclass
class FitResult:
    head: str
    d: int
    K: int
    final_mean_kl: float
    kl_trace: list[float]
    iterations: int
    seed: int
    restart: int = 0
    log_probs: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class SweepRow:
    head: str
    d: int
    K: int
    restarts: int
    final_kl: float
    rank: int
    iters: int
    seed: int


def gen_language(N: int, M: int, r: int, scale: float = config.LANGUAGE_SCALE, seed: int = 0) -> SyntheticLanguage:
    """A = row_log_softmax(scale * U V^T) with U: N x r, V: M x r standard normal."""
    if not 1 <= r <= min(N, M):
        raise ContractViolation(f"Rank parameter r={r} must lie in [1, {min(N, M)}].")
    if scale <= 0:
        raise ContractViolation(f"scale must be positive, got {scale}.")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((N, r))
    V = rng.standard_normal((M, r))
    A = log_softmax(scale * (U @ V.T), axis=1)
    if not np.all(np.isfinite(A)) or np.any(np.exp(A) <= 0.0):
        raise ContractViolation("Language has zero-probability entries; lower the scale.")
    return SyntheticLanguage(A=A, rank_param=r, seed=seed, scale=scale)


def cell_seed(base_seed: int, head: str, d: int, K: int, restart: int) -> int:
    """
    Seed of one (head, d, K, restart) cell: the first 32-bit word of
    numpy SeedSequence([base_seed, head index, d, K, restart]).
    """
    entropy = [int(base_seed), HEAD_KINDS.index(head), int(d), int(K), int(restart)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


# --- Objectives ---
# Each returns (mean KL, grads, fitted log-prob matrix) for explicit parameters:
#   softmax: H (N x d), W (M x d)
#   moc/mos: H (K x N x d), S (N x K prior logits), W (M x d)

def _mean_kl(A: np.ndarray, P: np.ndarray, A_hat: np.ndarray) -> float:
    return float(np.sum(P * (A - A_hat)) / A.shape[0])


def _softmax_objective(params, A, P):
    H, W = params["H"], params["W"]
    A_hat = log_softmax(H @ W.T, axis=1)
    dZ = (np.exp(A_hat) - P) / A.shape[0]
    return _mean_kl(A, P, A_hat), {"H": dZ @ W, "W": dZ.T @ H}, A_hat


def _moc_objective(params, A, P):
    H, S, W = params["H"], params["S"], params["W"]
    pi = softmax(S, axis=1)
    mixed = np.einsum("nk,knd->nd", pi, H)
    A_hat = log_softmax(mixed @ W.T, axis=1)
    dZ = (np.exp(A_hat) - P) / A.shape[0]
    d_mixed = dZ @ W
    d_pi = np.einsum("nd,knd->nk", d_mixed, H)
    grads = {
        "H": np.einsum("nk,nd->knd", pi, d_mixed),
        "S": pi * (d_pi - (pi * d_pi).sum(axis=1, keepdims=True)),
        "W": dZ.T @ mixed,
    }
    return _mean_kl(A, P, A_hat), grads, A_hat


def _mos_objective(params, A, P):
    H, S, W = params["H"], params["S"], params["W"]
    log_pi = log_softmax(S, axis=1)
    comp = log_softmax(H @ W.T, axis=-1)                    # K x N x M
    joint = log_pi.T[:, :, None] + comp
    A_hat = lse_rows(joint, axis=0)[0]
    resp = np.exp(joint - A_hat)                            # posterior over components
    d_comp = (-P / A.shape[0]) * resp
    dZ = d_comp - np.exp(comp) * d_comp.sum(axis=-1, keepdims=True)
    d_log_pi = d_comp.sum(axis=-1).T                        # N x K
    grads = {
        "H": dZ @ W,
        "S": d_log_pi - np.exp(log_pi) * d_log_pi.sum(axis=1, keepdims=True),
        "W": np.einsum("knm,knd->md", dZ, H),
    }
    return _mean_kl(A, P, A_hat), grads, A_hat


OBJECTIVES = {"softmax": _softmax_objective, "moc": _moc_objective, "mos": _mos_objective}


def init_fit_params(head: str, N: int, M: int, d: int, K: int, rng: np.random.Generator,
                    init_range: float = config.INIT_RANGE) -> dict[str, np.ndarray]:
    if head == "softmax":
        return {"H": rng.uniform(-init_range, init_range, (N, d)),
                "W": rng.uniform(-init_range, init_range, (M, d))}
    return {"H": rng.uniform(-init_range, init_range, (K, N, d)),
            "S": rng.uniform(-init_range, init_range, (N, K)),
            "W": rng.uniform(-init_range, init_range, (M, d))}


def _fit_once(language: SyntheticLanguage, head: str, d: int, K: int, fit: FitConfig,
              seed: int, restart: int) -> FitResult:
    A = language.A
    P = np.exp(A)
    N, M = A.shape
    rng = np.random.default_rng(seed)
    params = init_fit_params(head, N, M, d, K, rng, fit.init_range)
    objective = OBJECTIVES[head]
    optimizer = Adam(lr=fit.lr)
    trace = []
    for step in range(fit.iterations):
        kl, grads, _ = objective(params, A, P)
        if not math.isfinite(kl):
            raise FittingFailure(step, kl)
        if step % fit.log_every == 0:
            trace.append(max(kl, 0.0))
        optimizer.lr = fit.lr_at(step)
        optimizer.step(params, grads)
    kl, _, A_hat = objective(params, A, P)
    if not math.isfinite(kl):
        raise FittingFailure(fit.iterations, kl)
    # KL is non-negative; tiny negatives are roundoff
    kl = max(kl, 0.0)
    trace.append(kl)
    return FitResult(head, d, K, kl, trace, fit.iterations, seed, restart, A_hat)


def fit_head(language: SyntheticLanguage, head: str, d: int, K: int = 1, fit: FitConfig | None = None,
             base_seed: int | None = None) -> FitResult:
    """
    Fits explicit head parameters to minimise mean KL(P* || P_theta) with full-batch Adam.
    Returns the best of fit.restarts independently seeded restarts.
    """
    fit = (fit or FitConfig()).validate()
    if head not in HEAD_KINDS:
        raise ContractViolation(f"Unknown head kind {head!r}.")
    if d < 1 or K < 1:
        raise ContractViolation(f"d and K must be positive, got d={d}, K={K}.")
    if head == "softmax":
        K = 1
    base = language.seed if base_seed is None else base_seed
    best = None
    for restart in range(fit.restarts):
        result = _fit_once(language, head, d, K, fit, cell_seed(base, head, d, K, restart), restart)
        logger.debug(f"{head} d={d} K={K} restart {restart}: KL {result.final_mean_kl:.3e}")
        if best is None or result.final_mean_kl < best.final_mean_kl:
            best = result
    logger.info(f"Fitted {head} d={d} K={K}: best KL {best.final_mean_kl:.3e} (restart {best.restart})")
    return best


def _sweep_cell(language, head, d, K, fit, base_seed) -> SweepRow:
    result = fit_head(language, head, d, K, fit, base_seed)
    rank = numerical_rank(svd_values(result.log_probs))
    return SweepRow(head, d, result.K, fit.restarts, result.final_mean_kl, rank, result.iterations, result.seed)


def sweep_cells(d_values, K_values) -> list[tuple[str, int, int]]:
    """Softmax once per d; MoC and MoS over the full (d, K) grid."""
    cells = [("softmax", d, 1) for d in d_values]
    for head in ("moc", "mos"):
        cells += [(head, d, K) for d in d_values for K in K_values]
    return cells


def bottleneck_sweep(language: SyntheticLanguage, d_values, K_values, fit: FitConfig | None = None,
                     base_seed: int | None = None, threads: int = config.DEFAULT_THREADS) -> list[SweepRow]:
    """One fitted cell per (head, d, K) with the numerical rank of its log-prob matrix."""
    d_values, K_values = list(d_values), list(K_values)
    if not d_values or not K_values:
        raise ContractViolation("Sweep grids must be non-empty.")
    fit = (fit or FitConfig()).validate()
    cells = sweep_cells(d_values, K_values)
    logger.info(f"Running bottleneck sweep: {len(cells)} cells on {threads} thread(s).")
    rows = Parallel(n_jobs=threads)(
        delayed(_sweep_cell)(language, head, d, K, fit, base_seed) for head, d, K in cells
    )
    return list(rows)


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            data = asdict(row)
            data["final_kl"] = f"{row.final_kl:.17g}"
            writer.writerow([data[col] for col in SWEEP_HEADER])
