import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urnwalk.errors import CapabilityError, DomainError
from urnwalk.model import ModelParams
from urnwalk.reinforcement import (
    ReinforcementSpec,
    SimplexPoint,
    eval_g,
    eval_g_arrays,
    grad_g,
    g_holder,
    make_spec,
    modulus_bound,
    simplex_grid,
)

from conftest import all_builtin_specs


def params_p(p):
    return ModelParams(p=p, q=0.5, q1=0.5, q2=0.5, N=5)


class TestEvalG:
    def test_half_memory_always_half(self):
        xs, ys = simplex_grid(200)
        params = params_p(0.5)
        for spec in all_builtin_specs():
            vals = eval_g_arrays(spec, params, xs, ys)
            assert np.all(vals == 0.5)

    def test_full_memory_is_f(self):
        xs, ys = simplex_grid(60)
        params = params_p(1.0)
        for spec in all_builtin_specs():
            assert np.allclose(eval_g_arrays(spec, params, xs, ys), spec.f(xs, ys), atol=0)

    def test_hand_value(self):
        spec = ReinforcementSpec(name="proj-x", f=lambda x, y: x)
        assert eval_g(spec, params_p(0.8), 0.25, 0.1) == pytest.approx(0.35, abs=1e-15)

    def test_range_on_grid(self):
        xs, ys = simplex_grid(200)
        for p in (0.0, 0.3, 1.0):
            for spec in all_builtin_specs():
                vals = eval_g_arrays(spec, params_p(p), xs, ys)
                assert vals.min() >= 0.0 and vals.max() <= 1.0

    def test_domain_error(self):
        spec = make_spec("constant")
        with pytest.raises(DomainError):
            eval_g(spec, params_p(0.5), 0.6, 0.5)
        # within tolerance of the boundary is fine
        eval_g(spec, params_p(0.5), 0.5, 0.5 + 1e-13)

    def test_simplex_point_validates(self):
        SimplexPoint(0.3, 0.7)
        with pytest.raises(DomainError):
            SimplexPoint(0.3, 0.8)


class TestGradG:
    def test_constant_gradient_zero(self):
        spec = make_spec("constant", c=0.3)
        assert grad_g(spec, params_p(0.9), 0.2, 0.3) == (0.0, 0.0)

    def test_affine_gradient(self):
        spec = make_spec("affine", a=0.4)
        gx, gy = grad_g(spec, params_p(1.0), 0.1, 0.2)
        assert gx == pytest.approx(0.4, abs=1e-15)
        assert gy == pytest.approx(-0.4, abs=1e-15)

    def test_quadratic_hand_value(self):
        spec = make_spec("quadratic")
        gx, gy = grad_g(spec, params_p(0.75), 0.3, 0.2)
        assert gx == pytest.approx(0.3, abs=1e-12)  # (2p-1) * 2x = 0.5 * 0.6
        assert gy == pytest.approx(0.0, abs=1e-12)

    def test_analytic_vs_finite_difference(self):
        # 51x51 interior grid, 1e-6 absolute agreement for every C2 builtin
        xs, ys = simplex_grid(50)
        interior = (xs > 0) & (ys > 0) & (xs + ys < 1)
        xs, ys = xs[interior], ys[interior]
        params = params_p(0.8)
        for spec in all_builtin_specs():
            fd_twin = dataclasses.replace(spec, grad_f=None)
            for x, y in zip(xs, ys):
                exact = grad_g(spec, params, float(x), float(y))
                approx = grad_g(fd_twin, params, float(x), float(y))
                assert abs(exact[0] - approx[0]) < 1e-6
                assert abs(exact[1] - approx[1]) < 1e-6

    def test_holder_only_raises(self):
        spec = ReinforcementSpec(name="rough", f=lambda x, y: 0.5, holder=(1.0, 0.5))
        with pytest.raises(CapabilityError):
            grad_g(spec, params_p(0.5), 0.2, 0.2)


class TestModulusBound:
    def test_constant_and_affine_zero(self):
        for spec in (make_spec("constant"), make_spec("affine", a=0.4)):
            assert modulus_bound(spec, params_p(1.0), 0.5) == 0.0

    def test_quadratic_certifies_true_lipschitz(self):
        # grad F = (2x, 0) has Lipschitz constant exactly 2
        spec = make_spec("quadratic")
        assert modulus_bound(spec, params_p(1.0), 0.1) >= 0.2

    def test_memory_scaling(self):
        spec = make_spec("quadratic")
        assert modulus_bound(spec, params_p(0.75), 0.1) == pytest.approx(
            0.5 * modulus_bound(spec, params_p(1.0), 0.1)
        )

    def test_declared_modulus_used(self):
        spec = ReinforcementSpec(
            name="declared",
            f=lambda x, y: 0.5,
            grad_f=lambda x, y: (0.0, 0.0),
            grad_modulus=lambda d: 3.0 * d,
        )
        assert modulus_bound(spec, params_p(1.0), 0.2) == pytest.approx(0.6)

    def test_c1_without_modulus_raises(self):
        spec = ReinforcementSpec(name="c1-bare", f=lambda x, y: 0.5, grad_f=lambda x, y: (0.0, 0.0))
        with pytest.raises(CapabilityError):
            modulus_bound(spec, params_p(1.0), 0.1)


class TestMetadata:
    def test_holder_scaling(self):
        spec = make_spec("affine", a=0.3)
        L, alpha = g_holder(spec, params_p(0.75))
        assert alpha == 1.0
        assert L == pytest.approx(0.5 * 0.3 * np.sqrt(2))

    def test_smoothness_classes(self):
        assert make_spec("constant").smoothness_class == "C2"
        assert ReinforcementSpec(name="x", f=lambda x, y: 0.5, holder=(1, 1)).smoothness_class == "Holder"

    @given(st.sampled_from(["constant", "affine", "quadratic", "logistic"]), st.floats(0, 1), st.floats(0, 1))
    def test_g_in_unit_interval(self, kind, p, t):
        # random simplex point via the square-to-triangle map
        x = t * 0.9
        y = (1 - x) * 0.7
        spec = make_spec(kind)
        val = eval_g(spec, params_p(p), x, y)
        assert -1e-12 <= val <= 1 + 1e-12
