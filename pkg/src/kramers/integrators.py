"""Coupled time-stepping of the inertial system and its small-mass limit.

Both processes are driven by the same Brownian increments on a shared
uniform grid, which is what makes the pathwise sup-distance between them
a meaningful observable.  The inertial system

    dx = v dt,   m dv = [F(x) - gamma(x) v] dt + sigma(x) dB

is stepped with coefficients frozen at the current position:

  1. the velocity receives its exact Ornstein-Uhlenbeck update over dt,
     v' = E v + gamma^{-1}(I - E) F + xi with E = exp(-gamma dt / m) and
     xi Gaussian with the exact frozen-coefficient covariance
     m^{-2} int_0^dt exp(-gamma s/m) sigma sigma^T exp(-gamma^T s/m) ds
     (computed from a Lyapunov solve);
  2. the position advances through the impulse balance of the frozen
     system integrated over the step,
     x' = x + gamma^{-1} [F dt + sigma dB - m (v' - v)],
     which is the exact relation x' - x = int v dt, pathwise.

The velocity noise xi is split into its projection onto the step's
Brownian increment plus an independent conditional remainder drawn from
the same per-path stream, so the inertial and limit integrations consume
the identical increment dB.  The update is exact for constant
coefficients at any dt, and as gamma dt / m grows it degenerates
continuously into the Euler-Maruyama step of the limit equation driven
by the same increment, so one grid serves the whole mass ladder.
(Advancing the position with v' dt instead inflates the positional noise
by a factor of order gamma dt / m near friction singularities, which
visibly corrupts exit statistics at small mass.)

The limit equation is stepped with Euler-Maruyama.  A position sample
that leaves the domain sends the trajectory to the absorbing cemetery
state; the extended distance between samples is infinite as soon as
either one is in the cemetery.  Exit is detected at grid points only,
and only through the position (a velocity of any size never triggers
exit; a non-finite sample aborts the path with a diagnostic instead).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SingularSystem
from .lyapunov import expm, friction_inverse, solve_lyapunov
from .models import Model, limiting_diffusion, limiting_drift

BLOCK_STEPS = 4096
MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# States, noise, results


@dataclass(frozen=True)
class ExtendedState:
    """In-domain state (position, optional velocity) or the cemetery point.

    The cemetery is absorbing: simulation never resumes from it.
    """

    x: Optional[np.ndarray]
    v: Optional[np.ndarray] = None

    @property
    def is_cemetery(self):
        return self.x is None

    @classmethod
    def in_domain(cls, x, v=None):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if v is not None:
            v = np.atleast_1d(np.asarray(v, dtype=float))
        return cls(x=x, v=v)


CEMETERY = ExtendedState(x=None, v=None)


class NoiseStream:
    """Reproducible k-dimensional Brownian increments for one path.

    The increment sequence is a pure function of (master_seed,
    path_index): a counter-based Philox generator is keyed with the
    pair, so replay is identical across runs, batchings and thread
    schedules.  Increments are i.i.d. centered Gaussians with variance
    dt per coordinate.  Each integration step consumes one increment
    row as the shared Brownian increment plus auxiliary rows for the
    conditional remainder of the inertial velocity noise.
    """

    def __init__(self, master_seed: int, path_index: int, k: int, dt: float):
        if master_seed < 0 or path_index < 0:
            raise ValueError("master_seed and path_index must be nonnegative")
        self.master_seed = int(master_seed)
        self.path_index = int(path_index)
        self.k = int(k)
        self.dt = float(dt)
        key = np.array(
            [self.master_seed & MASK64, self.path_index & MASK64], dtype=np.uint64
        )
        self._rng = np.random.Generator(np.random.Philox(key=key))

    def increments(self, count: int):
        """Next ``count`` increments, shape (count, k), each ~ N(0, dt I)."""
        return self._rng.standard_normal((count, self.k)) * np.sqrt(self.dt)


def aux_rows_per_step(n: int, k: int) -> int:
    """Stream rows consumed per step beyond the shared increment."""
    return -(-n // k)


@dataclass
class TrajectoryPair:
    """Grid-sampled coupled trajectories with exit bookkeeping.

    Cemetery samples are stored as NaN rows.  ``sup_distance`` is the
    maximum of the extended distance over all grid points and is
    infinite exactly when either trajectory reached the cemetery within
    the horizon.
    """

    times: np.ndarray
    x_m: np.ndarray
    v_m: np.ndarray
    x_limit: np.ndarray
    distances: np.ndarray
    sup_distance: float
    exit_time_m: Optional[float]
    exit_time_limit: Optional[float]
    aborted: bool

    def to_csv(self) -> str:
        n = self.x_m.shape[1]
        cols = (
            ["t"]
            + [f"x_{i+1}" for i in range(n)]
            + [f"v_{i+1}" for i in range(n)]
            + [f"x_lim_{i+1}" for i in range(n)]
            + ["exited_m", "exited_lim"]
        )
        lines = [",".join(cols)]
        for j, t in enumerate(self.times):
            exited_m = int(not np.all(np.isfinite(self.x_m[j])))
            exited_l = int(not np.all(np.isfinite(self.x_limit[j])))
            row = [repr(float(t))]
            row += ["" if exited_m else repr(float(v)) for v in self.x_m[j]]
            row += ["" if exited_m else repr(float(v)) for v in self.v_m[j]]
            row += ["" if exited_l else repr(float(v)) for v in self.x_limit[j]]
            row += [str(exited_m), str(exited_l)]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


@dataclass
class BatchResult:
    """Per-path summaries of one batch of coupled simulations."""

    sup_distance: np.ndarray
    exit_time_m: np.ndarray
    exit_time_limit: np.ndarray
    aborted: np.ndarray
    final_x_m: np.ndarray
    final_v_m: np.ndarray
    final_x_limit: np.ndarray
    recorded: Optional[dict] = None


# ---------------------------------------------------------------------------
# Extended distance


def d_infinity(p, q):
    """Euclidean distance extended to the cemetery: infinite if either
    argument is the cemetery point (including both)."""
    px = p.x if isinstance(p, ExtendedState) else p
    qx = q.x if isinstance(q, ExtendedState) else q
    if px is None or qx is None:
        return np.inf
    return float(np.linalg.norm(np.asarray(px, dtype=float) - np.asarray(qx, dtype=float)))


# ---------------------------------------------------------------------------
# Exact frozen-coefficient step operators


def _psd_factor(cov, k):
    """Factor A (n, k) with A A^T = cov for symmetric PSD cov."""
    n = cov.shape[0]
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, Q = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1]
        w = np.clip(w[order], 0.0, None)
        L = Q[:, order] * np.sqrt(w)
    if k == n:
        return L
    if k > n:
        return np.hstack([L, np.zeros((n, k - n))])
    return L[:, :k]


def _scalar_velocity_noise(g, s2, m, dt):
    """Exact one-step velocity-noise law for gamma = g I, sigma sigma^T = s2 I.

    Per coordinate the noise xi splits as c_v dB + l_v u with u a unit
    normal: c_v carries the projection onto the step increment, l_v the
    conditional remainder.  Uses expm1 to keep the small-theta
    cancellations accurate.
    """
    theta = g * (dt / m)
    a = np.exp(-theta)
    om = -np.expm1(-theta)
    s = np.sqrt(s2)
    c_v = s * om / (g * dt)
    phi = np.maximum(0.5 * (1.0 + a) - om / theta, 0.0)
    l_v = np.sqrt(s2 * om * phi / (g * m))
    return a, om, c_v, l_v


def underdamped_velocity_noise_operator(model, x, m, dt):
    """Exact velocity-noise operators at a single point, matrix coefficients.

    Returns (E, ginv, C_vB, L_v): the decay propagator exp(-gamma dt/m),
    the friction inverse, the covariance of the noise with the step
    increment divided by dt (so C_vB dB / dt is the projection), and the
    factor of the conditional remainder.  The total covariance
    m^{-2} int_0^dt exp(-gamma s/m) Q exp(-gamma^T s/m) ds, Q = sigma
    sigma^T, comes from the Lyapunov solve
    (gamma/m) M + M (gamma/m)^T = Q - E Q E^T.
    """
    gamma = np.asarray(model.friction(x), dtype=float)
    sigma = np.asarray(model.diffusion(x), dtype=float)
    n = model.dim_n
    E = expm(-gamma * (dt / m))
    ginv = friction_inverse(gamma)
    Q = sigma @ sigma.T
    rhs = Q - E @ Q @ E.T
    if not np.any(rhs):
        return E, ginv, np.zeros((n, sigma.shape[1])), np.zeros((n, n))
    S_vv = solve_lyapunov(gamma / m, rhs).J / m**2
    C_vB = ginv @ (np.eye(n) - E) @ sigma
    R_v = S_vv - C_vB @ C_vB.T / dt
    L_v = _psd_factor(0.5 * (R_v + R_v.T), n)
    return E, ginv, C_vB, L_v


def step_underdamped(model, state: ExtendedState, m, dt, dW, dW_aux=None) -> ExtendedState:
    """One exact frozen-coefficient step of the inertial system.

    ``dW`` is the shared Brownian increment (variance dt per coordinate);
    ``dW_aux`` supplies n further increments of the same variance for the
    conditional remainder of the velocity noise (``None`` applies only
    the projection onto ``dW``, which under-disperses the velocity at
    intermediate gamma dt / m; the batch kernels always pass the
    remainder).  Returns the cemetery state when the new position leaves
    the domain.
    """
    if state.is_cemetery:
        return CEMETERY
    x = np.asarray(state.x, dtype=float)
    v = np.zeros(model.dim_n) if state.v is None else np.asarray(state.v, dtype=float)
    n = model.dim_n
    F = np.asarray(model.force(x), dtype=float)
    sigma = np.asarray(model.diffusion(x), dtype=float)
    dW = np.asarray(dW, dtype=float)
    E, ginv, C_vB, L_v = underdamped_velocity_noise_operator(model, x, m, dt)
    xi = C_vB @ (dW / dt)
    if dW_aux is not None:
        xi = xi + L_v @ (np.asarray(dW_aux, dtype=float).ravel()[:n] / np.sqrt(dt))
    v_new = E @ v + ginv @ (np.eye(n) - E) @ F + xi
    x_new = x + ginv @ (F * dt + sigma @ dW - m * (v_new - v))
    if not model.domain.contains(x_new):
        return CEMETERY
    return ExtendedState(x=x_new, v=v_new)


def step_overdamped(model, state, dt, dW) -> ExtendedState:
    """One Euler-Maruyama step of the limit equation
    dx = [gamma^{-1} F + S] dt + gamma^{-1} sigma dB  (Ito)."""
    if isinstance(state, ExtendedState):
        if state.is_cemetery:
            return CEMETERY
        x = np.asarray(state.x, dtype=float)
    else:
        x = np.asarray(state, dtype=float)
    drift = limiting_drift(model, x)
    diff = limiting_diffusion(model, x)
    x_new = x + drift * dt + diff @ np.asarray(dW, dtype=float)
    if not model.domain.contains(x_new):
        return CEMETERY
    return ExtendedState(x=x_new, v=None)


# ---------------------------------------------------------------------------
# Batch kernel


def run_coupled_batch(
    model: Model, x0, v0, m, T, dt, streams, record=False
) -> BatchResult:
    """Integrate a batch of coupled path pairs under per-path noise streams.

    The batch is advanced in lockstep with vectorized coefficient
    evaluations when the model carries isotropic coefficients, otherwise
    path by path through the reference single-step functions.  Either
    way each path is a pure function of its own stream, so results do
    not depend on how paths are grouped into batches.
    """
    if model.iso is not None and model.dim_k == model.dim_n:
        return _run_batch_isotropic(model, x0, v0, m, T, dt, streams, record)
    return _run_batch_general(model, x0, v0, m, T, dt, streams, record)


def _prepare_initial(model, x0, v0, n_paths):
    n = model.dim_n
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(model.domain.contains(x0)):
        raise ValueError("initial position must lie inside the open domain")
    v0 = np.zeros(n) if v0 is None else np.atleast_1d(np.asarray(v0, dtype=float))
    x_m = np.tile(x0, (n_paths, 1))
    v_m = np.tile(v0, (n_paths, 1))
    return x_m, v_m, x_m.copy()


def _run_batch_isotropic(model, x0, v0, m, T, dt, streams, record):
    iso = model.iso
    domain = model.domain
    has_boundary = domain.has_boundary
    P = len(streams)
    n = model.dim_n
    n_steps = int(round(T / dt)) if T > 0 else 0
    sqrt_dt = np.sqrt(dt)

    x_m, v_m, x_l = _prepare_initial(model, x0, v0, P)
    alive_m = np.ones(P, dtype=bool)
    alive_l = np.ones(P, dtype=bool)
    aborted = np.zeros(P, dtype=bool)
    exit_step_m = np.full(P, -1, dtype=np.int64)
    exit_step_l = np.full(P, -1, dtype=np.int64)
    sup_d = np.zeros(P)

    rec = None
    if record:
        rec = {
            "x_m": np.full((n_steps + 1, P, n), np.nan),
            "v_m": np.full((n_steps + 1, P, n), np.nan),
            "x_limit": np.full((n_steps + 1, P, n), np.nan),
            "distances": np.full((n_steps + 1, P), np.nan),
        }
        rec["x_m"][0] = x_m
        rec["v_m"][0] = v_m
        rec["x_limit"][0] = x_l
        rec["distances"][0] = 0.0

    step = 0
    with np.errstate(all="ignore"):
        while step < n_steps:
            block = min(BLOCK_STEPS, n_steps - step)
            draws = np.stack(
                [s.increments(2 * block).reshape(block, 2, model.dim_k) for s in streams]
            )  # (P, block, 2, k)
            for j in range(block):
                w = draws[:, j, 0, :]
                u = draws[:, j, 1, :] / sqrt_dt
                # inertial side: exact OU velocity update + impulse balance
                g, s2, _ = iso.bundle(x_m)
                F = model.force(x_m)
                a, om, c_v, l_v = _scalar_velocity_noise(g, s2, m, dt)
                v_cand = (
                    a[:, None] * v_m
                    + (om / g)[:, None] * F
                    + c_v[:, None] * w
                    + l_v[:, None] * u
                )
                x_cand = x_m + (
                    F * dt + np.sqrt(s2)[:, None] * w - m * (v_cand - v_m)
                ) / g[:, None]
                # limit side: Euler-Maruyama with noise-induced drift
                gl, s2l, grad_gl = iso.bundle(x_l)
                Fl = model.force(x_l)
                drift = Fl / gl[:, None] - (s2l / (2.0 * gl**3))[:, None] * grad_gl
                xl_cand = x_l + drift * dt + (np.sqrt(s2l) / gl)[:, None] * w

                finite_m = np.isfinite(x_cand).all(axis=1) & np.isfinite(v_cand).all(axis=1)
                finite_l = np.isfinite(xl_cand).all(axis=1)
                newly_aborted = (alive_m & ~finite_m) | (alive_l & ~finite_l)
                if newly_aborted.any():
                    aborted |= newly_aborted
                    alive_m &= ~newly_aborted
                    alive_l &= ~newly_aborted

                if has_boundary:
                    in_m = domain.contains(x_cand)
                    exit_now = alive_m & ~in_m
                    if exit_now.any():
                        exit_step_m[exit_now] = step + j + 1
                        alive_m &= in_m
                    in_l = domain.contains(xl_cand)
                    exit_now = alive_l & ~in_l
                    if exit_now.any():
                        exit_step_l[exit_now] = step + j + 1
                        alive_l &= in_l

                x_m = np.where(alive_m[:, None], x_cand, x_m)
                v_m = np.where(alive_m[:, None], v_cand, v_m)
                x_l = np.where(alive_l[:, None], xl_cand, x_l)

                both = alive_m & alive_l
                dist = np.linalg.norm(x_m - x_l, axis=1)
                sup_d = np.where(
                    both,
                    np.maximum(sup_d, dist),
                    np.where(aborted, sup_d, np.inf),
                )
                if record:
                    t_idx = step + j + 1
                    rec["x_m"][t_idx] = np.where(alive_m[:, None], x_m, np.nan)
                    rec["v_m"][t_idx] = np.where(alive_m[:, None], v_m, np.nan)
                    rec["x_limit"][t_idx] = np.where(alive_l[:, None], x_l, np.nan)
                    rec["distances"][t_idx] = np.where(
                        both, dist, np.where(aborted, np.nan, np.inf)
                    )
            step += block

    return _finalize_batch(
        dt, n_steps, sup_d, exit_step_m, exit_step_l, aborted,
        alive_m, alive_l, x_m, v_m, x_l, rec,
    )


def _run_batch_general(model, x0, v0, m, T, dt, streams, record):
    n = model.dim_n
    P = len(streams)
    rows = 1 + aux_rows_per_step(n, model.dim_k)
    n_steps = int(round(T / dt)) if T > 0 else 0
    x_m0, v_m0, _ = _prepare_initial(model, x0, v0, P)

    sup_d = np.zeros(P)
    exit_step_m = np.full(P, -1, dtype=np.int64)
    exit_step_l = np.full(P, -1, dtype=np.int64)
    aborted = np.zeros(P, dtype=bool)
    final_x_m = np.full((P, n), np.nan)
    final_v_m = np.full((P, n), np.nan)
    final_x_l = np.full((P, n), np.nan)
    rec = None
    if record:
        rec = {
            "x_m": np.full((n_steps + 1, P, n), np.nan),
            "v_m": np.full((n_steps + 1, P, n), np.nan),
            "x_limit": np.full((n_steps + 1, P, n), np.nan),
            "distances": np.full((n_steps + 1, P), np.nan),
        }

    for p, stream in enumerate(streams):
        state_m = ExtendedState(x=x_m0[p].copy(), v=v_m0[p].copy())
        state_l = ExtendedState(x=x_m0[p].copy())
        sup = 0.0
        if record:
            rec["x_m"][0, p] = state_m.x
            rec["v_m"][0, p] = state_m.v
            rec["x_limit"][0, p] = state_l.x
            rec["distances"][0, p] = 0.0
        for j in range(n_steps):
            block = stream.increments(rows)
            w = block[0]
            aux = block[1:].ravel()[:n]
            try:
                if not state_m.is_cemetery:
                    state_m = step_underdamped(model, state_m, m, dt, w, dW_aux=aux)
                    if state_m.is_cemetery:
                        exit_step_m[p] = j + 1
                if not state_l.is_cemetery:
                    state_l = step_overdamped(model, state_l, dt, w)
                    if state_l.is_cemetery:
                        exit_step_l[p] = j + 1
            except (FloatingPointError, SingularSystem):
                aborted[p] = True
                break
            if not state_m.is_cemetery and not np.all(np.isfinite(state_m.x)):
                aborted[p] = True
                break
            d = d_infinity(state_m, state_l)
            sup = max(sup, d)
            if record:
                if not state_m.is_cemetery:
                    rec["x_m"][j + 1, p] = state_m.x
                    rec["v_m"][j + 1, p] = state_m.v
                if not state_l.is_cemetery:
                    rec["x_limit"][j + 1, p] = state_l.x
                rec["distances"][j + 1, p] = d
        sup_d[p] = sup if not aborted[p] else 0.0
        if not state_m.is_cemetery and not aborted[p]:
            final_x_m[p] = state_m.x
            final_v_m[p] = state_m.v
        if not state_l.is_cemetery and not aborted[p]:
            final_x_l[p] = state_l.x

    alive_m = exit_step_m < 0
    alive_l = exit_step_l < 0
    return _finalize_batch(
        dt, n_steps, sup_d, exit_step_m, exit_step_l, aborted,
        alive_m, alive_l, final_x_m, final_v_m, final_x_l, rec,
        overwrite_finals=False,
    )


def _finalize_batch(
    dt, n_steps, sup_d, exit_step_m, exit_step_l, aborted,
    alive_m, alive_l, x_m, v_m, x_l, rec, overwrite_finals=True,
):
    exit_time_m = np.where(exit_step_m >= 0, exit_step_m * dt, np.nan)
    exit_time_l = np.where(exit_step_l >= 0, exit_step_l * dt, np.nan)
    if overwrite_finals:
        final_x_m = np.where(alive_m[:, None], x_m, np.nan)
        final_v_m = np.where(alive_m[:, None], v_m, np.nan)
        final_x_l = np.where(alive_l[:, None], x_l, np.nan)
    else:
        final_x_m, final_v_m, final_x_l = x_m, v_m, x_l
    if rec is not None:
        rec["times"] = np.arange(n_steps + 1) * dt
    return BatchResult(
        sup_distance=sup_d,
        exit_time_m=exit_time_m,
        exit_time_limit=exit_time_l,
        aborted=aborted,
        final_x_m=final_x_m,
        final_v_m=final_v_m,
        final_x_limit=final_x_l,
        recorded=rec,
    )


def simulate_coupled(
    model: Model, x0, v0, m, T, dt, master_seed, path_index=0
) -> TrajectoryPair:
    """Simulate one coupled pair (inertial, limit) on the shared grid.

    Both integrations consume the identical increments of the
    (master_seed, path_index) noise stream.  After either process hits
    the cemetery its samples stay there and the sup-distance is
    infinite.
    """
    stream = NoiseStream(master_seed, path_index, model.dim_k, dt)
    result = run_coupled_batch(model, x0, v0, m, T, dt, [stream], record=True)
    rec = result.recorded
    aborted = bool(result.aborted[0])
    exit_m = result.exit_time_m[0]
    exit_l = result.exit_time_limit[0]
    distances = rec["distances"][:, 0]
    sup = float(result.sup_distance[0])
    return TrajectoryPair(
        times=rec["times"],
        x_m=rec["x_m"][:, 0, :],
        v_m=rec["v_m"][:, 0, :],
        x_limit=rec["x_limit"][:, 0, :],
        distances=distances,
        sup_distance=sup,
        exit_time_m=None if np.isnan(exit_m) else float(exit_m),
        exit_time_limit=None if np.isnan(exit_l) else float(exit_l),
        aborted=aborted,
    )
