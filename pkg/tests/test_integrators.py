"""Stepping schemes, noise streams, coupling and cemetery mechanics."""

import numpy as np
import pytest

from kramers.integrators import (
    CEMETERY,
    ExtendedState,
    NoiseStream,
    aux_rows_per_step,
    d_infinity,
    run_coupled_batch,
    simulate_coupled,
    step_overdamped,
    step_underdamped,
)
from kramers.models import constant_model, wall_gravity_model

from conftest import make_noiseless_model


def oracle_underdamped_step(model, x, v, m, dt, w, aux, nodes=2000):
    """Independent re-implementation of the exact frozen-coefficient step.

    Matrix exponentials through an eigendecomposition, the velocity-noise
    covariance and increment projection through Simpson quadrature of the
    explicit kernel K_v(u) = e^{-beta (dt-u)} sigma / m, and the position
    through the impulse balance of the frozen system integrated exactly:
    m (v' - v) = F dt - gamma (x' - x) + sigma dB.
    """
    gamma = np.asarray(model.friction(x), dtype=float)
    sigma = np.asarray(model.diffusion(x), dtype=float)
    F = np.asarray(model.force(x), dtype=float)
    n = len(x)
    beta = gamma / m
    lam, V = np.linalg.eig(beta)
    Vinv = np.linalg.inv(V)

    def exp_beta(s):
        return np.real((V * np.exp(-lam * s)) @ Vinv)

    h = dt / nodes
    grid = np.arange(nodes + 1) * h
    simpson = np.ones(nodes + 1)
    simpson[1:-1:2], simpson[2:-1:2] = 4.0, 2.0
    simpson *= h / 3.0

    Eb = exp_beta(dt)
    int_eb = np.real((V * ((1 - np.exp(-lam * dt)) / lam)) @ Vinv)
    Kv = [exp_beta(dt - u) @ sigma / m for u in grid]
    Svv = sum(wgt * kv @ kv.T for wgt, kv in zip(simpson, Kv))
    Pv = sum(wgt * kv for wgt, kv in zip(simpson, Kv))
    Rv = Svv - Pv @ Pv.T / dt
    Lv = np.linalg.cholesky(0.5 * (Rv + Rv.T))
    xi = Pv @ (w / dt) + Lv @ (np.asarray(aux, dtype=float)[:n] / np.sqrt(dt))
    v_new = Eb @ v + int_eb @ (F / m) + xi
    x_new = x + np.linalg.inv(gamma) @ (F * dt + sigma @ w - m * (v_new - v))
    return x_new, v_new


class TestDInfinity:
    def test_coincident_points(self):
        assert d_infinity(np.array([0.3, 0.4]), np.array([0.3, 0.4])) == 0.0

    def test_cemetery_vs_interior(self):
        assert d_infinity(CEMETERY, np.array([0.5])) == np.inf
        assert d_infinity(np.array([0.5]), CEMETERY) == np.inf

    def test_cemetery_vs_cemetery(self):
        assert d_infinity(CEMETERY, CEMETERY) == np.inf

    def test_euclidean(self):
        assert d_infinity(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0

    def test_extended_state_wrappers(self):
        a = ExtendedState.in_domain([1.0], [0.0])
        b = ExtendedState.in_domain([1.5])
        assert d_infinity(a, b) == pytest.approx(0.5)


class TestNoiseStream:
    def test_pure_function_of_key(self):
        a = NoiseStream(42, 7, 2, 1e-3).increments(100)
        b = NoiseStream(42, 7, 2, 1e-3).increments(100)
        np.testing.assert_array_equal(a, b)

    def test_distinct_paths_differ(self):
        a = NoiseStream(42, 0, 1, 1e-3).increments(50)
        b = NoiseStream(42, 1, 1, 1e-3).increments(50)
        assert not np.allclose(a, b)

    def test_blocking_does_not_change_sequence(self):
        whole = NoiseStream(9, 3, 2, 1e-2).increments(64)
        stream = NoiseStream(9, 3, 2, 1e-2)
        parts = np.concatenate([stream.increments(10), stream.increments(54)])
        np.testing.assert_array_equal(whole, parts)

    def test_moments(self):
        draws = NoiseStream(1, 0, 1, 0.25).increments(200_000)[:, 0]
        assert np.mean(draws) == pytest.approx(0.0, abs=5e-3)
        assert np.var(draws) == pytest.approx(0.25, rel=2e-2)

    def test_rejects_negative_keys(self):
        with pytest.raises(ValueError):
            NoiseStream(-1, 0, 1, 1e-3)

    def test_aux_row_budget(self):
        assert aux_rows_per_step(1, 1) == 1
        assert aux_rows_per_step(2, 2) == 1
        assert aux_rows_per_step(3, 1) == 3


class TestStepUnderdamped:
    def test_deterministic_ou_decay(self, noiseless_model):
        state = ExtendedState.in_domain([0.0], [1.0])
        out = step_underdamped(noiseless_model, state, m=0.5, dt=0.1, dW=np.zeros(1))
        assert out.v[0] == pytest.approx(np.exp(-1.0 * 0.1 / 0.5), rel=1e-12)
        # position advances by the exact integral of the decaying velocity
        assert out.x[0] == pytest.approx(0.5 * (1 - np.exp(-0.2)), rel=1e-12)

    def test_cemetery_is_absorbing(self, noiseless_model):
        assert step_underdamped(noiseless_model, CEMETERY, 0.1, 0.01, np.zeros(1)).is_cemetery

    @pytest.mark.parametrize("m,dt", [(0.05, 0.01), (1e-3, 0.01), (0.5, 0.2)])
    def test_one_step_against_independent_oracle_isotropic(self, m, dt):
        model = constant_model(friction=1.3, k_spring=0.8)
        x, v = np.array([0.4]), np.array([-0.2])
        w, aux = np.array([0.0137]), np.array([-0.008])
        got = step_underdamped(model, ExtendedState(x, v), m, dt, w, dW_aux=aux)
        ex, ev = oracle_underdamped_step(model, x, v, m, dt, w, aux)
        assert got.x == pytest.approx(ex, rel=1e-8)
        assert got.v == pytest.approx(ev, rel=1e-8)

    def test_one_step_against_independent_oracle_matrix(self, matrix_model):
        x, v = np.array([0.3, -0.5]), np.array([1.0, 0.2])
        w = np.array([0.021, -0.013])
        aux = np.array([0.005, -0.017])
        got = step_underdamped(matrix_model, ExtendedState(x, v), 0.2, 0.05, w, dW_aux=aux)
        ex, ev = oracle_underdamped_step(matrix_model, x, v, 0.2, 0.05, w, aux)
        assert got.x == pytest.approx(ex, rel=1e-8)
        assert got.v == pytest.approx(ev, rel=1e-8)

    def test_stationary_velocity_variance_is_equipartition(self):
        # sigma sigma^T = 2 kBT gamma gives Var v -> kBT / m per coordinate;
        # oracle: exact scalar OU stationary covariance sigma^2/(2 gamma m)
        kBT, g0, m = 1.0, 1.0, 0.5
        model = constant_model(friction=g0, k_spring=0.0, kBT=kBT)
        sigma_sq = 2.0 * kBT * g0
        oracle = sigma_sq / (2.0 * g0 * m)
        assert oracle == pytest.approx(kBT / m)
        P, T, dt = 512, 8.0, 0.01
        streams = [NoiseStream(123, i, 1, dt) for i in range(P)]
        out = run_coupled_batch(model, [0.0], [0.0], m, T, dt, streams)
        var = np.var(out.final_v_m[:, 0], ddof=1)
        se = oracle * np.sqrt(2.0 / (P - 1))
        assert abs(var - oracle) < 3.0 * se

    def test_large_theta_step_matches_limit_euler(self):
        # when gamma dt / m is huge the inertial position update collapses
        # onto the overdamped Euler step driven by the same increment
        model = constant_model(friction=2.0, k_spring=1.5)
        x = np.array([0.7])
        w = np.array([0.02])
        got = step_underdamped(
            model, ExtendedState(x, np.array([3.0])), m=1e-12, dt=1e-3, dW=w,
            dW_aux=np.array([0.004]),
        )
        euler = step_overdamped(model, x, 1e-3, w)
        assert got.x == pytest.approx(euler.x, rel=1e-6)


class TestStepOverdamped:
    def test_explicit_euler_deterministic(self, noiseless_model):
        out = step_overdamped(noiseless_model, np.array([1.0]), dt=0.01, dW=np.zeros(1))
        assert out.x[0] == pytest.approx(1.0 * (1.0 - 0.01), rel=1e-14)

    def test_ou_moments_analytic(self):
        model = constant_model(friction=1.0, k_spring=1.0)
        kappa, s_over_g = 1.0, np.sqrt(2.0)
        T, dt, P = 1.0, 1e-3, 4096
        streams = [NoiseStream(5, i, 1, dt) for i in range(P)]
        out = run_coupled_batch(model, [1.0], None, 1e-2, T, dt, streams)
        xs = out.final_x_limit[:, 0]
        mean_exact = np.exp(-kappa * T)
        var_exact = s_over_g**2 / (2 * kappa) * (1 - np.exp(-2 * kappa * T))
        assert np.mean(xs) == pytest.approx(mean_exact, abs=4 * np.sqrt(var_exact / P))
        assert np.var(xs, ddof=1) == pytest.approx(
            var_exact, abs=4 * var_exact * np.sqrt(2 / P) + 2 * dt
        )

    def test_model1_midpoint_drift_no_noise_term(self):
        model = wall_gravity_model()
        x = np.array([0.5])
        out = step_overdamped(model, x, dt=1e-4, dW=np.zeros(1))
        expected = x + model.force(x) * 1.0 * 1e-4  # D(mid)=1, D'(mid)=0
        assert out.x == pytest.approx(expected, rel=1e-12)

    def test_exit_returns_cemetery(self, open_interval_model):
        out = step_overdamped(
            open_interval_model, np.array([0.05]), dt=0.01, dW=np.array([-1.0])
        )
        assert out.is_cemetery


class TestSimulateCoupled:
    def test_noiseless_singular_perturbation(self):
        model = make_noiseless_model()
        sups = [
            simulate_coupled(model, [1.0], None, m, 1.0, 1e-3, master_seed=0).sup_distance
            for m in (1e-1, 1e-3, 1e-5)
        ]
        assert sups[0] > sups[1] > sups[2]
        assert sups[2] < 1e-3

    def test_bit_identical_replay(self):
        model = wall_gravity_model()
        a = simulate_coupled(model, [0.5], None, 1e-3, 0.02, 1e-4, master_seed=71, path_index=3)
        b = simulate_coupled(model, [0.5], None, 1e-3, 0.02, 1e-4, master_seed=71, path_index=3)
        np.testing.assert_array_equal(a.x_m, b.x_m)
        np.testing.assert_array_equal(a.v_m, b.v_m)
        np.testing.assert_array_equal(a.x_limit, b.x_limit)
        assert a.sup_distance == b.sup_distance

    def test_sup_distance_is_max_over_grid(self):
        model = constant_model()
        pair = simulate_coupled(model, [1.0], None, 1e-2, 0.05, 1e-3, master_seed=2)
        assert pair.sup_distance == pytest.approx(np.nanmax(pair.distances))
        assert pair.distances[0] == 0.0

    def test_absorption_and_infinite_sup(self, open_interval_model):
        # free diffusion on (0,1) from x0=0.1 exits almost surely by T=1
        pair = simulate_coupled(open_interval_model, [0.1], None, 1e-3, 1.0, 1e-3, master_seed=4)
        assert pair.exit_time_m is not None or pair.exit_time_limit is not None
        assert pair.sup_distance == np.inf
        for traj, texit in ((pair.x_m, pair.exit_time_m), (pair.x_limit, pair.exit_time_limit)):
            if texit is None:
                continue
            j = int(round(texit / 1e-3))
            assert np.all(np.isfinite(traj[:j]))
            assert np.all(np.isnan(traj[j:]))

    def test_exit_only_through_position(self, noiseless_model):
        # unbounded domain: enormous velocities never mark an exit
        pair = simulate_coupled(noiseless_model, [1.0], [1e6], 1e-6, 0.01, 1e-4, master_seed=0)
        assert pair.exit_time_m is None
        assert pair.aborted is False

    def test_exit_flag_near_wall(self, open_interval_model):
        pair = simulate_coupled(open_interval_model, [0.02], None, 1e-2, 0.5, 1e-3, master_seed=9)
        assert pair.exit_time_m is not None
        j = int(round(pair.exit_time_m / 1e-3))
        last_alive = pair.x_m[j - 1, 0]
        assert 0.0 < last_alive < 1.0

    def test_csv_dump_format(self, open_interval_model):
        pair = simulate_coupled(open_interval_model, [0.1], None, 1e-3, 0.3, 1e-3, master_seed=4)
        text = pair.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "t,x_1,v_1,x_lim_1,exited_m,exited_lim"
        assert len(lines) == len(pair.times) + 1
        # cemetery samples render as empty fields with the exit flag set
        if pair.exit_time_m is not None:
            j = int(round(pair.exit_time_m / 1e-3))
            fields = lines[1 + j].split(",")
            assert fields[1] == "" and fields[2] == ""
            assert fields[4] == "1"

    def test_batch_kernel_matches_reference_steps(self):
        # same increments through the vectorized kernel and the single-step path
        model = wall_gravity_model()
        m, dt, steps = 1e-2, 1e-3, 20
        stream = NoiseStream(17, 0, 1, dt)
        batch = run_coupled_batch(model, [0.4], None, m, steps * dt, dt, [stream], record=True)
        replay = NoiseStream(17, 0, 1, dt)
        state_m = ExtendedState.in_domain([0.4], [0.0])
        state_l = ExtendedState.in_domain([0.4])
        for j in range(steps):
            block = replay.increments(2)
            w, aux = block[0], block[1]
            state_m = step_underdamped(model, state_m, m, dt, w, dW_aux=aux)
            state_l = step_overdamped(model, state_l, dt, w)
            assert batch.recorded["x_m"][j + 1, 0] == pytest.approx(state_m.x, rel=1e-10)
            assert batch.recorded["v_m"][j + 1, 0] == pytest.approx(state_m.v, rel=1e-10)
            assert batch.recorded["x_limit"][j + 1, 0] == pytest.approx(state_l.x, rel=1e-10)

    def test_general_matrix_model_coupled_run(self, matrix_model):
        pair = simulate_coupled(matrix_model, [0.5, -0.3], None, 1e-2, 0.02, 1e-3, master_seed=11)
        assert np.isfinite(pair.sup_distance)
        assert pair.x_m.shape == (21, 2)

    def test_weak_order_sanity_halving_dt(self):
        # E[x(T)^2] moves by less than the Monte Carlo CI when dt halves
        model = constant_model()
        P, T = 4096, 1.0
        est, ci = {}, {}
        for dt in (2e-3, 1e-3):
            streams = [NoiseStream(31, i, 1, dt) for i in range(P)]
            out = run_coupled_batch(model, [1.0], None, 1e-2, T, dt, streams)
            xs = out.final_x_limit[:, 0] ** 2
            est[dt] = np.mean(xs)
            ci[dt] = 1.96 * np.std(xs, ddof=1) / np.sqrt(P)
        assert abs(est[2e-3] - est[1e-3]) < ci[2e-3] + ci[1e-3]

    def test_zero_horizon(self):
        model = constant_model()
        pair = simulate_coupled(model, [1.0], None, 1e-2, 0.0, 1e-3, master_seed=0)
        assert pair.sup_distance == 0.0
        assert len(pair.times) == 1
