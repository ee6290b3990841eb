import numpy as np
import pytest

from kramers.models import (
    DiffusionProfile,
    IsotropicCoefficients,
    Model,
    all_space,
    from_fluctuation_dissipation,
    interval,
)


def make_noiseless_model(g0=1.0, k_spring=1.0, n=1):
    """Deterministic benchmark: constant friction, zero noise, F = -k x."""

    def bundle(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        return np.full(shape, g0), np.zeros(shape), np.zeros(x.shape)

    return Model(
        name="noiseless",
        dim_n=n,
        dim_k=n,
        force=lambda x: -k_spring * np.asarray(x, dtype=float),
        friction=lambda x: g0 * np.eye(n),
        diffusion=lambda x: np.zeros((n, n)),
        domain=all_space(n),
        analytic_friction_grad=lambda x: np.zeros((n, n, n)),
        iso=IsotropicCoefficients(bundle=bundle),
        analytic_noise_drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def make_open_interval_model(a=0.0, b=1.0, kBT=1.0):
    """Free diffusion on a bounded interval without confining walls.

    Exits are frequent by design; used to exercise cemetery mechanics.
    """
    profile = DiffusionProfile(
        D=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        D_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        kBT=kBT,
    )
    return from_fluctuation_dissipation(
        profile,
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        interval(a, b),
        n=1,
        name="open-interval",
    )


def make_matrix_model():
    """Anisotropic 2D model with full-matrix friction (no scalar fast path)."""

    def friction(x):
        x = np.asarray(x, dtype=float)
        return np.array([[2.0 + x[0] ** 2, 0.3], [0.1, 1.5 + 0.5 * x[1] ** 2]])

    def diffusion(x):
        x = np.asarray(x, dtype=float)
        scale = 1.0 + 0.1 * np.sin(x[1])
        return scale * np.array([[1.0, 0.2], [0.0, 0.8]])

    def friction_grad(x):
        x = np.asarray(x, dtype=float)
        d0 = np.array([[2.0 * x[0], 0.0], [0.0, 0.0]])
        d1 = np.array([[0.0, 0.0], [0.0, 1.0 * x[1]]])
        return np.stack([d0, d1])

    return Model(
        name="matrix",
        dim_n=2,
        dim_k=2,
        force=lambda x: -np.asarray(x, dtype=float),
        friction=friction,
        diffusion=diffusion,
        domain=all_space(2),
        analytic_friction_grad=friction_grad,
    )


@pytest.fixture
def noiseless_model():
    return make_noiseless_model()


@pytest.fixture
def open_interval_model():
    return make_open_interval_model()


@pytest.fixture
def matrix_model():
    return make_matrix_model()
