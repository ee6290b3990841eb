"""Matrix Lyapunov equation and the noise-induced drift pipeline.

The overdamped limit of an inertial Langevin system with state-dependent
friction gamma and noise coefficient sigma acquires an extra drift

    S_i(x) = sum_{j,l} d/dx_l [gamma^{-1}(x)]_{ij} * J_{jl}(x),

where J(x) solves the Lyapunov equation

    J gamma^T + gamma J = sigma sigma^T.

Dimensions here are tiny (n <= 4), so the Lyapunov equation is solved
directly by Kronecker vectorization of the n^2 x n^2 linear system.  An
independent quadrature of the integral representation

    J = int_0^inf exp(-t gamma) sigma sigma^T exp(-t gamma^T) dt

is provided as a cross-check oracle (``integral_lyapunov``); it is never
used on the simulation path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryTooClose, HorizonTooShort, SingularSystem

RESIDUAL_RTOL = 1e-12
INVERSE_COND_LIMIT = 1e14

# Pade(6,6) numerator coefficients of exp(x), scaled to integers.
_PADE6 = np.array(
    [665280.0, 332640.0, 75600.0, 10080.0, 840.0, 42.0, 1.0]
)


@dataclass(frozen=True)
class LyapunovSolution:
    """Solution J of J gamma^T + gamma J = sigma sigma^T with its residual."""

    J: np.ndarray
    residual_norm: float | np.ndarray


def min_symmetric_eigenvalue(gamma):
    """Smallest eigenvalue of the symmetric part (gamma + gamma^T)/2."""
    gamma = np.asarray(gamma, dtype=float)
    sym = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    return np.linalg.eigvalsh(sym)[..., 0]


def expm(A):
    """Matrix exponential by scaling-and-squaring with a Pade(6,6) kernel.

    Accepts a single (n, n) matrix or a stack (..., n, n).  Adequate for
    the small, well-scaled matrices this package works with.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    norm = np.abs(A).sum(axis=-2).max(axis=-1)  # 1-norm per matrix
    max_norm = float(np.max(norm)) if norm.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(max_norm / 0.5)))) if max_norm > 0.5 else 0
    A = A / (2.0 ** squarings)

    ident = np.broadcast_to(np.eye(n), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    b = _PADE6
    U = A @ (b[1] * ident + b[3] * A2 + b[5] * A4)
    V = b[0] * ident + b[2] * A2 + b[4] * A4 + b[6] * A6
    R = np.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        R = R @ R
    return R


def lyapunov_residual(gamma, J, sigma_sq):
    """Frobenius norm of gamma J + J gamma^T - sigma sigma^T."""
    res = gamma @ J + J @ np.swapaxes(gamma, -1, -2) - sigma_sq
    return np.linalg.norm(res, axis=(-2, -1))


def solve_lyapunov(gamma, sigma_sq, rtol=RESIDUAL_RTOL) -> LyapunovSolution:
    """Solve J gamma^T + gamma J = sigma_sq by Kronecker vectorization.

    ``sigma_sq`` is the symmetric positive-semidefinite matrix
    sigma sigma^T.  The solution is symmetrized before the residual test.

    Raises ``SingularSystem`` when the friction matrix has a non-positive
    symmetric part or the assembled linear system cannot be solved to the
    relative residual tolerance.
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    n = gamma.shape[0]
    if gamma.shape != (n, n) or sigma_sq.shape != (n, n):
        raise ValueError("gamma and sigma_sq must be square matrices of equal size")
    if not (min_symmetric_eigenvalue(gamma) > 0.0):
        raise SingularSystem("friction matrix symmetric part is not positive-definite")

    eye = np.eye(n)
    K = np.kron(eye, gamma) + np.kron(gamma, eye)
    try:
        vec = np.linalg.solve(K, sigma_sq.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("Lyapunov system is singular") from exc
    J = vec.reshape((n, n), order="F")
    J = 0.5 * (J + J.T)
    residual = float(lyapunov_residual(gamma, J, sigma_sq))
    if not residual <= rtol * (1.0 + float(np.linalg.norm(sigma_sq))):
        raise SingularSystem(
            f"Lyapunov residual {residual:.3e} exceeds tolerance; "
            "friction matrix is numerically singular"
        )
    return LyapunovSolution(J=J, residual_norm=residual)


def integral_lyapunov(
    gamma, sigma_sq, quadrature_horizon=None, step=None
) -> LyapunovSolution:
    """Quadrature of the integral representation of J (cross-check oracle).

    Composite Simpson quadrature of exp(-t gamma) sigma_sq exp(-t gamma^T)
    on [0, horizon].  Matrix exponentials at the nodes are accumulated as
    powers of the per-step exponential.  Accepts stacked input
    (..., n, n); the stacked form exists so that large cross-check batches
    stay cheap.

    Raises ``HorizonTooShort`` when ||exp(-horizon gamma)||_F >= 1e-12.
    """
    gamma = np.asarray(gamma, dtype=float)
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    n = gamma.shape[-1]
    lam_min = min_symmetric_eigenvalue(gamma)
    if not np.all(lam_min > 0.0):
        raise SingularSystem("friction matrix symmetric part is not positive-definite")

    if quadrature_horizon is None:
        quadrature_horizon = 28.0 / float(np.min(lam_min))
    tail = np.linalg.norm(expm(-quadrature_horizon * gamma), axis=(-2, -1))
    if not np.all(tail < 1e-12):
        raise HorizonTooShort(
            f"||exp(-T gamma)||_F = {float(np.max(tail)):.3e} >= 1e-12 at T = "
            f"{quadrature_horizon}"
        )
    if step is None:
        lam_max = np.linalg.eigvalsh(
            0.5 * (gamma + np.swapaxes(gamma, -1, -2))
        )[..., -1]
        step = 0.01 / max(1.0, float(np.max(lam_max)))
    n_panels = int(np.ceil(quadrature_horizon / step))
    n_panels += n_panels % 2
    h = quadrature_horizon / n_panels

    # Simpson sum with the integrand advanced by f_j = E f_{j-1} E^T,
    # accumulating odd and even nodes separately to avoid per-node scaling.
    E = expm(-h * gamma)
    ET = np.swapaxes(E, -1, -2)
    f = np.broadcast_to(sigma_sq, gamma.shape).copy()
    f0 = f.copy()
    acc_odd = np.zeros_like(f)
    acc_even = np.zeros_like(f)
    for j in range(1, n_panels):
        f = E @ f @ ET
        if j % 2 == 1:
            acc_odd += f
        else:
            acc_even += f
    f_last = E @ f @ ET
    J = (h / 3.0) * (f0 + 4.0 * acc_odd + 2.0 * acc_even + f_last)
    J = 0.5 * (J + np.swapaxes(J, -1, -2))
    residual = lyapunov_residual(gamma, J, sigma_sq)
    if residual.ndim == 0:
        residual = float(residual)
    return LyapunovSolution(J=J, residual_norm=residual)


def friction_inverse(gamma):
    """Inverse of the friction matrix, guarded against near-singularity."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0]
    if np.linalg.cond(gamma) > INVERSE_COND_LIMIT:
        raise SingularSystem("friction matrix condition number exceeds 1e14")
    inv = np.linalg.inv(gamma)
    if not np.allclose(gamma @ inv, np.eye(n), atol=1e-12, rtol=1e-12):
        raise SingularSystem("friction inverse failed the identity check")
    return inv


def default_fd_step(x):
    """Central-difference step scaled to the magnitude of the position."""
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


def grad_friction_inverse(model, x, h=None):
    """Gradient tensor d/dx_l [gamma^{-1}]_{ij}, indexed [l, i, j].

    Uses the model's analytic friction gradient through the identity
    d(gamma^{-1})/dx_l = -gamma^{-1} (d gamma/dx_l) gamma^{-1} when
    available, otherwise central finite differences of gamma^{-1}.
    """
    x = np.asarray(x, dtype=float)
    n = model.dim_n
    if h is None:
        h = default_fd_step(x)
    if not (model.domain.boundary_distance(x) > h):
        raise BoundaryTooClose(
            f"position within {h} of the domain boundary; cannot differentiate"
        )

    if model.analytic_friction_grad is not None:
        ginv = friction_inverse(model.friction(x))
        dgamma = np.asarray(model.analytic_friction_grad(x), dtype=float)
        return np.stack([-ginv @ dgamma[l] @ ginv for l in range(n)])

    grads = []
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        plus = friction_inverse(model.friction(x + e))
        minus = friction_inverse(model.friction(x - e))
        grads.append((plus - minus) / (2.0 * h))
    return np.stack(grads)


def noise_induced_drift(model, x, h=None):
    """Drift S(x) induced by state-dependent friction, via the full pipeline.

    Contracts the gradient of gamma^{-1} against the Lyapunov solution J
    evaluated at x:  S_i = sum_{j,l} d/dx_l[gamma^{-1}]_{ij} J_{jl}.
    """
    x = np.asarray(x, dtype=float)
    gamma = model.friction(x)
    sigma = model.diffusion(x)
    J = solve_lyapunov(gamma, sigma @ sigma.T).J
    dginv = grad_friction_inverse(model, x, h=h)
    return np.einsum("lij,jl->i", dginv, J)


def isotropic_noise_drift(g, grad_g, sigma_sq):
    """Noise-induced drift for isotropic coefficients gamma = g I.

    With gamma = g(x) I and sigma sigma^T = s2(x) I the Lyapunov solution
    is J = s2/(2 g) I and the drift contraction collapses to

        S = -s2 / (2 g^3) * grad g.

    Vectorized over leading axes; ``grad_g`` has shape (..., n).
    """
    coef = -sigma_sq / (2.0 * g**3)
    return coef[..., None] * grad_g
