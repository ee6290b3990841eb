"""Lyapunov solve, integral cross-check, inverses and the drift pipeline."""

from fractions import Fraction

import numpy as np
import pytest

from kramers.errors import BoundaryTooClose, HorizonTooShort, SingularSystem
from kramers.lyapunov import (
    default_fd_step,
    expm,
    friction_inverse,
    grad_friction_inverse,
    integral_lyapunov,
    isotropic_noise_drift,
    lyapunov_residual,
    noise_induced_drift,
    solve_lyapunov,
)
from kramers.models import (
    DiffusionProfile,
    builtin_diffusion_model1,
    constant_model,
    dlvo_pair_model,
    from_fluctuation_dissipation,
    interval,
    rotational_pore_model,
    wall_gravity_model,
)


def random_spd(n, rng, lo=0.5, hi=3.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * rng.uniform(lo, hi, n)) @ Q.T


def random_psd(n, rng):
    B = rng.standard_normal((n, n))
    return B @ B.T / n


def rational_lyapunov_oracle(gamma_rows, q_rows):
    """Exact solve of (I (x) gamma + gamma (x) I) vec(J) = vec(Q) in rationals.

    Brute-force Gaussian elimination over Fraction entries; column-major
    vec convention.  Independent of the production solver.
    """
    n = len(gamma_rows)
    gamma = [[Fraction(v) for v in row] for row in gamma_rows]
    q = [[Fraction(v) for v in row] for row in q_rows]
    N = n * n
    # K[(i,j),(p,l)] for vec index (i + n*j): gamma J term gives gamma[i][p] delta_jl,
    # J gamma^T term gives delta_ip gamma[j][l]
    K = [[Fraction(0)] * N for _ in range(N)]
    rhs = [Fraction(0)] * N
    for j in range(n):
        for i in range(n):
            row = i + n * j
            rhs[row] = q[i][j]
            for p in range(n):
                K[row][p + n * j] += gamma[i][p]
            for l in range(n):
                K[row][i + n * l] += gamma[j][l]
    # Gaussian elimination with partial pivoting on exact rationals
    for col in range(N):
        piv = max(range(col, N), key=lambda r: abs(K[r][col]))
        if K[piv][col] == 0:
            raise ZeroDivisionError("singular oracle system")
        K[col], K[piv] = K[piv], K[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(N):
            if r != col and K[r][col] != 0:
                factor = K[r][col] / K[col][col]
                rhs[r] -= factor * rhs[col]
                for cc in range(col, N):
                    K[r][cc] -= factor * K[col][cc]
    sol = [rhs[r] / K[r][r] for r in range(N)]
    return [[sol[i + n * j] for j in range(n)] for i in range(n)]


class TestSolveLyapunov:
    def test_scalar(self):
        sol = solve_lyapunov(np.array([[2.0]]), np.array([[4.0]]))
        assert sol.J == pytest.approx(np.array([[1.0]]))
        assert sol.residual_norm <= 1e-12 * 5.0

    def test_commuting_identity(self):
        sol = solve_lyapunov(3.0 * np.eye(2), np.eye(2))
        assert np.allclose(sol.J, np.eye(2) / 6.0, atol=1e-14)

    def test_nonsymmetric_gamma_against_rational_oracle(self):
        gamma = [[2, 1], [0, 3]]
        q = [[2, 0], [0, 2]]
        expected = rational_lyapunov_oracle(gamma, q)
        # frozen values from the exact oracle
        assert expected == [
            [Fraction(8, 15), Fraction(-1, 15)],
            [Fraction(-1, 15), Fraction(1, 3)],
        ]
        sol = solve_lyapunov(np.array(gamma, dtype=float), np.array(q, dtype=float))
        assert np.allclose(sol.J, np.array(expected, dtype=float), atol=1e-14)

    def test_residual_bound_on_random_instances(self):
        rng = np.random.default_rng(1)
        for n in (1, 2, 3, 4):
            for _ in range(25):
                gamma = random_spd(n, rng)
                q = random_psd(n, rng)
                sol = solve_lyapunov(gamma, q)
                assert sol.residual_norm <= 1e-12 * (1.0 + np.linalg.norm(q))
                # J symmetric PSD when gamma's symmetric part is PD
                assert np.allclose(sol.J, sol.J.T)
                assert np.linalg.eigvalsh(sol.J)[0] >= -1e-12

    def test_rejects_non_positive_definite(self):
        with pytest.raises(SingularSystem):
            solve_lyapunov(np.array([[0.0]]), np.array([[1.0]]))
        with pytest.raises(SingularSystem):
            solve_lyapunov(np.diag([1.0, -0.5]), np.eye(2))


class TestExpm:
    def test_against_series(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            A = rng.standard_normal((3, 3))
            # Taylor reference at small argument plus squaring
            B = A / 1024.0
            ref = np.eye(3)
            term = np.eye(3)
            for k in range(1, 20):
                term = term @ B / k
                ref = ref + term
            for _ in range(10):
                ref = ref @ ref
            assert np.allclose(expm(A), ref, rtol=1e-12, atol=1e-12)

    def test_diagonal(self):
        d = np.array([-0.3, 1.7])
        assert np.allclose(expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14)

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((5, 3, 3))
        batched = expm(A)
        for i in range(5):
            assert np.allclose(batched[i], expm(A[i]), rtol=1e-13, atol=1e-13)


class TestIntegralLyapunov:
    def test_scalar_closed_form(self):
        sol = integral_lyapunov(np.array([[2.0]]), np.array([[4.0]]))
        assert sol.J == pytest.approx(np.array([[1.0]]), abs=1e-8)

    def test_identity_pair(self):
        sol = integral_lyapunov(np.eye(2), np.eye(2))
        assert np.allclose(sol.J, 0.5 * np.eye(2), atol=1e-8)

    def test_agrees_with_direct_solver(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            gamma = random_spd(3, rng, lo=0.8, hi=3.0)
            q = random_psd(3, rng)
            direct = solve_lyapunov(gamma, q)
            quad = integral_lyapunov(gamma, q)
            assert np.linalg.norm(direct.J - quad.J) < 1e-8

    def test_horizon_too_short(self):
        with pytest.raises(HorizonTooShort):
            integral_lyapunov(np.array([[0.6]]), np.array([[1.0]]), quadrature_horizon=5.0)

    def test_batched_input(self):
        rng = np.random.default_rng(5)
        gammas = np.stack([random_spd(2, rng, lo=1.0, hi=2.0) for _ in range(4)])
        qs = np.stack([random_psd(2, rng) for _ in range(4)])
        batch = integral_lyapunov(gammas, qs)
        for i in range(4):
            single = integral_lyapunov(gammas[i], qs[i])
            assert np.allclose(batch.J[i], single.J, atol=1e-12)


class TestFrictionInverse:
    def test_scalar(self):
        assert friction_inverse(np.array([[2.0]])) == pytest.approx(np.array([[0.5]]))

    def test_diagonal(self):
        inv = friction_inverse(np.diag([2.0, 5.0]))
        assert np.allclose(inv, np.diag([0.5, 0.2]))

    def test_off_diagonal_against_adjugate(self):
        gamma = np.array([[3.0, 1.0], [0.5, 2.0]])
        det = 3.0 * 2.0 - 1.0 * 0.5
        adjugate = np.array([[2.0, -1.0], [-0.5, 3.0]]) / det
        assert np.allclose(friction_inverse(gamma), adjugate, atol=1e-14)

    def test_near_singular_raises(self):
        with pytest.raises(SingularSystem):
            friction_inverse(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]]))


class TestGradFrictionInverse:
    def test_constant_friction_zero(self):
        model = constant_model(n=2)
        tensor = grad_friction_inverse(model, np.zeros(2))
        assert np.allclose(tensor, 0.0)

    def test_1d_fluctuation_dissipation_derivative(self):
        # gamma = kBT / D(x) so d(gamma^{-1})/dx = D'(x)/kBT
        model = wall_gravity_model()
        x = np.array([0.37])
        tensor = grad_friction_inverse(model, x)
        d_prime = np.pi * np.sin(2 * np.pi * 0.37)
        assert tensor[0, 0, 0] == pytest.approx(d_prime, rel=1e-10)

    def test_midpoint_derivative_vanishes(self):
        model = wall_gravity_model(a=0.0, b=1.0)
        tensor = grad_friction_inverse(model, np.array([0.5]))
        assert abs(tensor[0, 0, 0]) < 1e-12

    def test_finite_difference_matches_analytic_at_order_h2(self):
        model = wall_gravity_model()
        import dataclasses

        fd_model = dataclasses.replace(model, analytic_friction_grad=None)
        x = np.array([0.3])
        exact = grad_friction_inverse(model, x)
        err_h = np.abs(grad_friction_inverse(fd_model, x, h=1e-3) - exact).max()
        err_h2 = np.abs(grad_friction_inverse(fd_model, x, h=5e-4) - exact).max()
        assert err_h / err_h2 == pytest.approx(4.0, rel=0.15)

    def test_boundary_margin_enforced(self):
        model = wall_gravity_model()
        with pytest.raises(BoundaryTooClose):
            grad_friction_inverse(model, np.array([1e-7]))

    def test_default_step_scales_with_position(self):
        assert default_fd_step(np.zeros(1)) == pytest.approx(1e-5)
        assert default_fd_step(np.array([3.0, 4.0])) == pytest.approx(6e-5)


class TestNoiseInducedDrift:
    def test_model1_equals_diffusion_derivative(self):
        model = wall_gravity_model()
        for xv in np.linspace(0.08, 0.92, 9):
            S = noise_induced_drift(model, np.array([xv]))
            expected = np.pi * np.sin(2 * np.pi * xv)
            assert S[0] == pytest.approx(expected, abs=1e-9)

    def test_model2_alternating_signs(self):
        model = dlvo_pair_model()
        for pt in [(-1.0, 0.2), (0.0, 1.0), (-0.3, 2.0), (0.5, 0.9)]:
            x = np.array(pt)
            S = noise_induced_drift(model, x)
            d = pt[1] - pt[0]
            d_prime = np.exp(-d)  # built-in profile: D_SE alpha e^{-alpha d}
            assert S == pytest.approx(np.array([-d_prime, d_prime]), abs=1e-9)

    def test_model3_radial_gradient(self):
        model = rotational_pore_model()
        for pt in [(0.3, 0.1), (-0.5, 0.4), (0.0, 0.8), (0.2, -0.6)]:
            x = np.array(pt)
            S = noise_induced_drift(model, x)
            s = x @ x
            d_prime = (0.5 - 1.0 - 2.0 * 0.5 * s)  # D0/C^2 (beta - 1 - 2 beta s/C^2)
            assert S == pytest.approx(2.0 * d_prime * x, abs=1e-9)

    def test_generic_pipeline_equals_isotropic_closed_form(self):
        model = dlvo_pair_model()
        rng = np.random.default_rng(9)
        pts = model.domain.sample_interior(rng, 20)
        for x in pts:
            g, s2, grad_g = model.iso.bundle(x)
            iso = isotropic_noise_drift(g, grad_g, s2)
            assert np.allclose(noise_induced_drift(model, x), iso, atol=1e-10)

    def test_smooth_custom_profile_reproduces_d_prime(self):
        # key analytic oracle: any 1D fluctuation-dissipation model gives S = D'
        dom = interval(0.1, 6.0)

        def D(x):
            return 1.5 + 0.7 * np.sin(3.0 * x) + 0.3 * np.cos(x)

        def D_prime(x):
            return 2.1 * np.cos(3.0 * x) - 0.3 * np.sin(x)

        profile = DiffusionProfile(D=D, D_prime=D_prime, kBT=1.7)
        model = from_fluctuation_dissipation(
            profile, lambda x: -np.asarray(x, dtype=float), dom, n=1
        )
        for xv in np.linspace(0.4, 5.6, 12):
            S = noise_induced_drift(model, np.array([xv]))
            assert S[0] == pytest.approx(D_prime(xv), abs=1e-8)

    def test_lyapunov_solution_for_fd_model_is_kbt(self):
        profile = builtin_diffusion_model1(0.0, 1.0, kBT=2.5)
        model = wall_gravity_model(kBT=2.5, D_profile=profile)
        x = np.array([0.4])
        gamma = model.friction(x)
        sigma = model.diffusion(x)
        sol = solve_lyapunov(gamma, sigma @ sigma.T)
        assert np.allclose(sol.J, 2.5 * np.eye(1), atol=1e-10)

    def test_residual_helper(self):
        gamma = np.array([[2.0]])
        assert lyapunov_residual(gamma, np.array([[1.0]]), np.array([[4.0]])) == 0.0
