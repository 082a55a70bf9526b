# tests/helpers.py
# Central-difference gradient checking.

import numpy as np

STEP = 1e-5


def numerical_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central differences of the scalar f() with respect to every entry of x (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        up = f()
        x[idx] = orig - step
        down = f()
        x[idx] = orig
        grad[idx] = (up - down) / (2 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Tensor-wise ||a - n|| / max(||a|| + ||n||, 1e-12)."""
    num = np.linalg.norm(analytic - numeric)
    return float(num / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12))


def check_param_grads(f, params: dict, grads: dict, tol: float = 1e-4) -> dict:
    """Returns {name: relative error} and asserts each is below tol."""
    errors = {name: rel_error(grads[name], numerical_grad(f, params[name])) for name in params}
    bad = {k: v for k, v in errors.items() if not v < tol}
    assert not bad, f"Gradient mismatch: {bad}"
    return errors
