# utils/linalg.py
# Dense matrix helpers, stable softmax primitives, Jacobi SVD and numerical rank.

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core import config
from core.errors import ContractViolation, NumericalFailure

logger = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class SvdSpectrum:
    """Singular values (descending) of a source_rows x source_cols matrix."""
    values: np.ndarray
    source_rows: int
    source_cols: int
    sweeps: int = 0
    algorithm: str = config.SVD_ALGORITHM

    @property
    def sigma_max(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validates and returns a finite 2-D float64 array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf entries.")
    return arr


def matmul(a, b) -> np.ndarray:
    """Standard matrix product a @ b with a shape check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"Cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}.")
    return a @ b


def log_sum_exp(row) -> float:
    """log(sum(exp(row))) computed as m + log(sum(exp(row - m)))."""
    v = np.asarray(row, dtype=np.float64).ravel()
    if v.size == 0:
        raise ContractViolation("log_sum_exp of an empty vector.")
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def lse_rows(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-stabilised log-sum-exp along an axis (keepdims)."""
    m = np.max(x, axis=axis, keepdims=True)
    # -inf rows only appear through zero mixture priors; keep them finite-safe
    m = np.where(np.isfinite(m), m, 0.0)
    return m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Log-softmax along an axis for arrays of any rank."""
    return x - lse_rows(x, axis=axis)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax along an axis for arrays of any rank."""
    return np.exp(log_softmax(x, axis=axis))


def row_log_softmax(m) -> np.ndarray:
    """Each row replaced by row - LSE(row)."""
    return log_softmax(as_matrix(m), axis=1)


def row_softmax(m) -> np.ndarray:
    """Each row replaced by exp(row - LSE(row))."""
    return np.exp(row_log_softmax(m))


def row_shift(m, lam) -> np.ndarray:
    """Adds lam[i] to every entry of row i; the result lies in F(m)."""
    m = as_matrix(m)
    lam = np.asarray(lam, dtype=np.float64).ravel()
    if lam.shape[0] != m.shape[0]:
        raise ContractViolation(f"Shift vector has length {lam.shape[0]}, matrix has {m.shape[0]} rows.")
    return m + lam[:, None]


# --- SVD ---

def _round_robin(p: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint column pairings covering every pair once (circle method)."""
    n = p + (p % 2)
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        left = players[: n // 2]
        right = players[n // 2:][::-1]
        pairs = [(i, j) if i < j else (j, i) for i, j in zip(left, right) if i < p and j < p]
        if pairs:
            idx = np.array(pairs, dtype=np.intp)
            rounds.append((idx[:, 0], idx[:, 1]))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_singular_values(u: np.ndarray, max_sweeps: int, tol: float) -> tuple[np.ndarray, int]:
    """One-sided Hestenes Jacobi: rotates columns of u until mutually orthogonal."""
    u = u.copy()
    p = u.shape[1]
    rounds = _round_robin(p)
    for sweep in range(1, max_sweeps + 1):
        off = 0.0
        for i, j in rounds:
            ui, uj = u[:, i], u[:, j]
            alpha = np.einsum("rk,rk->k", ui, ui)
            beta = np.einsum("rk,rk->k", uj, uj)
            gamma = np.einsum("rk,rk->k", ui, uj)
            norm = np.sqrt(alpha * beta)
            live = norm > 0.0
            ratio = np.zeros_like(gamma)
            ratio[live] = np.abs(gamma[live]) / norm[live]
            if ratio.size:
                off = max(off, float(ratio.max()))
            rotate = ratio > tol
            if not np.any(rotate):
                continue
            zeta = (beta[rotate] - alpha[rotate]) / (2.0 * gamma[rotate])
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            ri, rj = i[rotate], j[rotate]
            ui, uj = u[:, ri], u[:, rj]
            u[:, ri] = c * ui - s * uj
            u[:, rj] = s * ui + c * uj
        if off <= tol:
            return np.sqrt(np.einsum("rk,rk->k", u, u)), sweep
    raise NumericalFailure(f"Jacobi SVD did not converge within {max_sweeps} sweeps (off-diagonal {off:.3e}).", max_sweeps)


def svd_values(m, max_sweeps: int = config.SVD_MAX_SWEEPS, tol: float = config.SVD_TOLERANCE) -> SvdSpectrum:
    """
    Singular values of m, descending.
    The tall orientation is reduced to its square R factor by QR, then R's columns are
    orthogonalised by one-sided Jacobi; column norms are the singular values.
    """
    a = as_matrix(m)
    rows, cols = a.shape
    tall = a if rows >= cols else a.T
    r = np.linalg.qr(tall, mode="r")
    values, sweeps = _jacobi_singular_values(r, max_sweeps, tol)
    values = np.sort(values)[::-1]
    logger.debug(f"SVD of {rows}x{cols} converged in {sweeps} sweeps.")
    return SvdSpectrum(values=values, source_rows=rows, source_cols=cols, sweeps=sweeps)


def rank_threshold(s: SvdSpectrum) -> float:
    """Expected roundoff level max(rows, cols) * eps * sigma_max."""
    return max(s.source_rows, s.source_cols) * EPS * s.sigma_max


def numerical_rank(s: SvdSpectrum) -> int:
    """Count of singular values strictly above the roundoff threshold."""
    if s.sigma_max == 0.0:
        return 0
    return int(np.count_nonzero(s.values > rank_threshold(s)))


# --- CSV ---

def save_matrix_csv(m, path: str | Path) -> None:
    """Writes one row per line with 17 significant digits (lossless for float64)."""
    a = as_matrix(m)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for row in a:
            writer.writerow([f"{x:.17g}" for x in row])


def load_matrix_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Matrix file not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = [[float(x) for x in row] for row in csv.reader(f) if row]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ContractViolation(f"Ragged matrix CSV in {path}.")
    return as_matrix(np.array(rows), str(path))
