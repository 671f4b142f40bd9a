import numpy as np
import pytest

from urnwalk.model import ModelParams
from urnwalk.reinforcement import ReinforcementSpec, make_spec


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def symmetric_params():
    return ModelParams(p=0.3, q=0.5, q1=0.5, q2=0.5, N=10)


@pytest.fixture
def linear_third_params():
    """The critical worked example: kappa = 1/2."""
    return ModelParams(p=1.0, q=0.5, q1=0.75, q2=0.75, N=10)


def f_identity_spec():
    """F(x, y) = x with exact metadata; fails the contraction hypothesis at
    moderate q1 + q2."""
    return ReinforcementSpec(
        name="linear-x",
        f=lambda x, y: np.asarray(x, dtype=float) + 0.0 * np.asarray(y, dtype=float),
        holder=(1.0, 1.0),
        grad_f=lambda x, y: (np.ones_like(np.asarray(x, dtype=float)), np.zeros_like(np.asarray(x, dtype=float))),
        hessian_sup=(0.0, 0.0, 0.0),
    )


def all_builtin_specs():
    return [
        make_spec("constant", c=0.5),
        make_spec("affine", a=0.25),
        make_spec("quadratic"),
        make_spec("logistic", s=2.0),
    ]
