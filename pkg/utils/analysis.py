# utils/analysis.py
# Empirical log-prob matrices of trained models, rank reports, singular-value spectra,
# expected pairwise KLD and head timing benchmarks.

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from core import config
from core.errors import ContractViolation
from .checkpoint import Checkpoint
from .corpus import TokenStream, make_batches
from .linalg import SvdSpectrum, as_matrix, numerical_rank, rank_threshold, svd_values
from .model import LanguageModel, build_config
from .optim import SGD, clip_global_norm
from .time import median_step_seconds

logger = logging.getLogger(__name__)

# Matched-batch slowdowns of MoS-15 over Softmax reported for full-scale PTB and WT2.
REFERENCE_MOS15_SLOWDOWN = (1.9, 2.5)


@dataclass(frozen=True)
class RankReport:
    rows: int
    cols: int
    sigma_max: float
    threshold: float
    rank: int
    head: str | None = None
    d: int | None = None
    K: int | None = None
    svd_algorithm: str = config.SVD_ALGORITHM
    threshold_rule: str = config.RANK_THRESHOLD_RULE
    sweeps: int = 0
    source_rows: int | None = None
    row_cap: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SpectrumCurve:
    normalized: np.ndarray
    thresholds: np.ndarray
    cum_percent: np.ndarray

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(("threshold", "cum_percent"))
            for t, p in zip(self.thresholds, self.cum_percent):
                writer.writerow((f"{t:.17g}", f"{p:.17g}"))


@dataclass(frozen=True)
class LogProbMatrix:
    """Stacked next-token log-distributions plus how they were sampled."""
    matrix: np.ndarray
    positions: int
    row_cap: int | None = None


def _as_model(source: LanguageModel | Checkpoint) -> LanguageModel:
    return source.to_model() if isinstance(source, Checkpoint) else source


def subsample_rows(T: int, cap: int | None) -> np.ndarray:
    """Uniform-stride row indices when T exceeds cap."""
    if cap is None or T <= cap:
        return np.arange(T)
    return np.floor(np.arange(cap) * (T / cap)).astype(np.int64)


def empirical_logprob_matrix(source: LanguageModel | Checkpoint, stream: TokenStream,
                             max_rows: int | None = None) -> LogProbMatrix:
    """
    Row t is log P(. | x_0..x_t) with sequential B = 1 state carry; T = len(stream) - 1 rows,
    uniformly subsampled to max_rows when longer.
    """
    model = _as_model(source)
    if stream.vocab_size != model.vocab_size:
        raise ContractViolation(f"Stream vocabulary size {stream.vocab_size} does not match model's {model.vocab_size}.")
    if len(stream) < 2:
        raise ContractViolation("Need at least one prediction position.")
    full = np.concatenate(list(model.stream_log_probs(stream.ids)), axis=0)
    keep = subsample_rows(full.shape[0], max_rows)
    capped = max_rows if max_rows is not None and full.shape[0] > max_rows else None
    return LogProbMatrix(matrix=full[keep], positions=full.shape[0], row_cap=capped)


def rank_report(matrix, head: str | None = None, d: int | None = None, K: int | None = None,
                source_rows: int | None = None, row_cap: int | None = None) -> RankReport:
    """numerical_rank with the threshold and algorithm recorded alongside."""
    m = as_matrix(matrix)
    spectrum = svd_values(m)
    report = RankReport(
        rows=m.shape[0], cols=m.shape[1], sigma_max=spectrum.sigma_max,
        threshold=rank_threshold(spectrum), rank=numerical_rank(spectrum),
        head=head, d=d, K=K, sweeps=spectrum.sweeps, svd_algorithm=spectrum.algorithm,
        source_rows=source_rows, row_cap=row_cap,
    )
    logger.info(f"Rank of {m.shape[0]}x{m.shape[1]} log-prob matrix: {report.rank}")
    return report


def model_rank_report(source: LanguageModel | Checkpoint, stream: TokenStream,
                      max_rows: int | None = config.RANK_MAX_ROWS) -> RankReport:
    model = _as_model(source)
    lp = empirical_logprob_matrix(model, stream, max_rows)
    head = model.config.head
    return rank_report(lp.matrix, head.kind, head.d, head.components, lp.positions, lp.row_cap)


def spectrum_curve(matrix, grid_size: int = config.SPECTRUM_GRID,
                   spectrum: SvdSpectrum | None = None) -> SpectrumCurve:
    """
    Normalised singular values sigma_i / sigma_1 and the percentage of them below each
    threshold of a uniform grid over [0, 1]; the last grid point counts everything.
    """
    if grid_size < 2:
        raise ContractViolation("Spectrum grid needs at least two points.")
    spectrum = spectrum or svd_values(matrix)
    if spectrum.sigma_max == 0.0:
        raise ContractViolation("Spectrum of a zero matrix cannot be normalised.")
    normalized = spectrum.values / spectrum.sigma_max
    thresholds = np.linspace(0.0, 1.0, grid_size)
    below = np.searchsorted(np.sort(normalized), thresholds, side="left")
    cum = 100.0 * below / normalized.size
    cum[-1] = 100.0
    return SpectrumCurve(normalized=normalized, thresholds=thresholds, cum_percent=cum)


def pairwise_kld(source: LanguageModel | Checkpoint, stream: TokenStream,
                 num_pairs: int = config.KLD_PAIRS, seed: int = 0) -> float:
    """Monte-Carlo mean of KL(P(.|c) || P(.|c')) over positions drawn uniformly with replacement."""
    if num_pairs < 1:
        raise ContractViolation("num_pairs must be at least 1.")
    if len(stream) < 3:
        raise ContractViolation("Need at least two prediction positions.")
    lp = empirical_logprob_matrix(source, stream).matrix
    rng = np.random.default_rng(seed)
    i = rng.integers(0, lp.shape[0], size=num_pairs)
    j = rng.integers(0, lp.shape[0], size=num_pairs)
    kl = np.sum(np.exp(lp[i]) * (lp[i] - lp[j]), axis=1)
    return float(max(kl.mean(), 0.0))


# --- Timing ---

@dataclass(frozen=True)
class BenchConfig:
    vocab_size: int = 200
    d: int = 32
    hidden_dim: int = 64
    batch_size: int = 20
    bptt_len: int = 20
    warmup: int = config.BENCH_WARMUP_STEPS
    timed: int = config.BENCH_TIMED_STEPS
    seed: int = 0


@dataclass(frozen=True)
class BenchRow:
    head: str
    K: int
    median_seconds: float
    slowdown: float


def _train_step_timer(kind: str, K: int, bench: BenchConfig):
    cfg = build_config(bench.vocab_size, kind, bench.d, bench.hidden_dim, K)
    model = LanguageModel.initialize(cfg, bench.seed)
    rng = np.random.default_rng(bench.seed)
    ids = rng.integers(0, bench.vocab_size, size=bench.batch_size * (bench.bptt_len + 1) * 2)
    plan = make_batches(TokenStream(ids, bench.vocab_size), bench.batch_size, bench.bptt_len)
    inputs, targets = next(plan.windows())
    optimizer = SGD(lr=0.0)
    state = model.initial_state(bench.batch_size)

    def step():
        _, grads, _ = model.loss_and_grads(inputs, targets, state)
        clip_global_norm(grads, config.GRAD_CLIP)
        optimizer.step(model.params, grads)

    return step


def bench_heads(grid: list[tuple[str, int]], bench: BenchConfig | None = None) -> list[BenchRow]:
    """
    Median wall time of one training step per (head, K) cell at a matched batch,
    and its slowdown relative to the Softmax cell.
    """
    bench = bench or BenchConfig()
    if bench.timed < 20 or bench.warmup < 5:
        raise ContractViolation("Benchmarks need at least 5 warm-up and 20 timed steps.")
    if not grid:
        raise ContractViolation("Benchmark grid needs at least one cell to compare against Softmax.")
    grid = [("softmax", 1)] + list(grid)
    timings = []
    for kind, K in grid:
        seconds = median_step_seconds(_train_step_timer(kind, K, bench), bench.warmup, bench.timed)
        logger.info(f"{kind}-{K}: median step {seconds * 1000:.2f}ms")
        timings.append((kind, K, seconds))
    base = timings[0][2]
    return [BenchRow(kind, K, seconds, seconds / base) for kind, K, seconds in timings]
