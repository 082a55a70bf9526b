# tests/test_utils/test_optim.py
# Unit tests for SGD, Adam and gradient clipping.

import numpy as np
import pytest

from core.errors import ContractViolation
from utils.optim import SGD, Adam, clip_global_norm, global_norm, make_optimizer


class TestClipping:
    """Test suite for global-norm clipping."""

    def test_norm_over_all_tensors(self):
        """Test the joint L2 norm."""
        assert global_norm({"a": np.array([3.0]), "b": np.array([[4.0]])}) == pytest.approx(5.0)

    def test_clip_scales_in_place(self):
        """Test that large gradients are scaled to max_norm and the old norm returned."""
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        assert clip_global_norm(grads, 1.0) == pytest.approx(5.0)
        assert global_norm(grads) == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(grads["a"] / grads["b"], 0.75)

    def test_small_gradients_untouched(self):
        """Test that gradients under the limit are left alone."""
        grads = {"a": np.array([0.3, 0.4])}
        clip_global_norm(grads, 1.0)
        np.testing.assert_array_equal(grads["a"], [0.3, 0.4])


class TestOptimizers:
    """Test suite for parameter updates."""

    def test_sgd_step(self):
        """Test a plain gradient step."""
        params = {"w": np.array([1.0, 2.0])}
        SGD(lr=0.5).step(params, {"w": np.array([2.0, -2.0])})
        np.testing.assert_array_equal(params["w"], [0.0, 3.0])

    def test_sgd_zero_lr_is_identity(self):
        """Test that lr = 0 leaves parameters bitwise unchanged."""
        params = {"w": np.array([0.1, -0.2])}
        SGD(lr=0.0).step(params, {"w": np.array([5.0, 7.0])})
        np.testing.assert_array_equal(params["w"], [0.1, -0.2])

    def test_adam_first_step_is_sign_step(self):
        """Test that the bias-corrected first step moves each entry by about lr."""
        params = {"w": np.array([1.0, 1.0, 1.0])}
        Adam(lr=0.1).step(params, {"w": np.array([3.0, -0.5, 20.0])})
        np.testing.assert_allclose(params["w"], [0.9, 1.1, 0.9], atol=1e-6)

    def test_adam_minimises_quadratic(self):
        """Test convergence on f(w) = |w - 3|^2."""
        params = {"w": np.zeros(4)}
        opt = Adam(lr=0.05)
        for _ in range(2000):
            opt.step(params, {"w": 2 * (params["w"] - 3.0)})
        np.testing.assert_allclose(params["w"], 3.0, atol=1e-2)

    def test_make_optimizer(self):
        """Test the optimizer factory."""
        assert isinstance(make_optimizer("sgd", 1.0), SGD)
        assert isinstance(make_optimizer("adam", 1e-3), Adam)
        with pytest.raises(ContractViolation):
            make_optimizer("rmsprop", 1.0)
