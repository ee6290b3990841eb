"""Numerical non-explosivity evidence for the limit diffusion.

A candidate function V >= 0 certifies that the limit process never
leaves its domain in finite time when

  p1) V grows without bound toward the domain's edge: V >= C_k outside
      the shells X_k = {dist(x, boundary) > 1/k and |x| < k}, with
      C_k -> infinity, and
  p2) the generator of the limit diffusion satisfies a linear bound
      L V <= C V + D everywhere.

This module evaluates both properties by sampling: p1 by taking minima
of V over nested probe sets of the shell complements, p2 by fitting the
constants (C, D) on an interior core grid and checking the bound on
near-boundary and far-field probe points.  It supplies numerical
corroboration at chosen parameters, not a proof.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import SamplingFailure
from .lyapunov import friction_inverse
from .models import Model, limiting_drift

DEFAULT_SHELL_KS = (2, 4, 8, 16, 32, 64, 128, 256, 512)
P2_C_GRID = (0.0,) + tuple(float(2**i) for i in range(11))
BOUNDARY_PROBE_DISTANCES = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class LyapunovCandidate:
    """Candidate certificate V with its gradient and Hessian maps.

    All three callables are vectorized over (..., n) positions; V must
    be nonnegative on the domain.
    """

    V: Callable
    grad_V: Callable
    hess_V: Callable

    @classmethod
    def from_model(cls, model: Model) -> "LyapunovCandidate":
        if model.lyapunov_fn is None:
            raise ValueError(f"model {model.name!r} carries no candidate function")
        V, grad_V, hess_V = model.lyapunov_fn
        return cls(V=V, grad_V=grad_V, hess_V=hess_V)

    def consistency_error(self, points, h=1e-6):
        """Max relative finite-difference error between V, grad_V, hess_V."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[1]
        worst = 0.0
        for x in points:
            grad = np.asarray(self.grad_V(x), dtype=float)
            hess = np.asarray(self.hess_V(x), dtype=float)
            for l in range(n):
                e = np.zeros(n)
                e[l] = h
                fd_grad = (self.V(x + e) - self.V(x - e)) / (2 * h)
                scale = 1.0 + abs(fd_grad)
                worst = max(worst, abs(fd_grad - grad[l]) / scale)
                fd_hess = (
                    np.asarray(self.grad_V(x + e), dtype=float)
                    - np.asarray(self.grad_V(x - e), dtype=float)
                ) / (2 * h)
                hscale = 1.0 + np.abs(fd_hess)
                worst = max(worst, float(np.max(np.abs(fd_hess - hess[l]) / hscale)))
        return worst


@dataclass(frozen=True)
class ShellFamily:
    """Exhausting shells X_k = {dist(x, boundary) > 1/k and |x| < k}.

    For domains without boundary only the |x| < k clause applies.  The
    shells are nested and their union is the whole domain.
    """

    domain: object
    k: int

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.linalg.norm(x, axis=-1) < self.k
        if self.domain.has_boundary:
            inside = inside & (self.domain.boundary_distance(x) > 1.0 / self.k)
        return self.domain.contains(x) & inside

    def complement_contains(self, x):
        """Membership in X \\ X_k (still inside the open domain)."""
        return self.domain.contains(np.asarray(x, dtype=float)) & ~self.contains(x)


# ---------------------------------------------------------------------------
# Generator


def apply_generator(model: Model, cand, x):
    """Generator of the limit diffusion applied to the candidate at x.

    L V = b . grad V + 1/2 tr(Gamma hess V) with b the limit drift
    (including the noise-induced part) and Gamma = (gamma^-1 sigma)
    (gamma^-1 sigma)^T.  ``cand`` may be a LyapunovCandidate or a
    (V, grad V, hess V) triple.
    """
    if not isinstance(cand, LyapunovCandidate):
        cand = LyapunovCandidate(*cand)
    x = np.asarray(x, dtype=float)
    drift = limiting_drift(model, x)
    ginv_sigma = friction_inverse(model.friction(x)) @ np.asarray(
        model.diffusion(x), dtype=float
    )
    Gamma = ginv_sigma @ ginv_sigma.T
    grad = np.asarray(cand.grad_V(x), dtype=float)
    hess = np.asarray(cand.hess_V(x), dtype=float)
    return float(drift @ grad + 0.5 * np.trace(Gamma @ hess))


# ---------------------------------------------------------------------------
# Probe-point construction


def _boundary_offset_points(domain, deltas):
    """Points at prescribed distances from the boundary, fixed lateral grid."""
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        return np.empty((0, domain.dim))
    if domain.kind == "interval":
        lo = domain.a + deltas
        hi = domain.b - deltas
        return np.concatenate([lo, hi])[:, None]
    if domain.kind == "half_plane_order":
        centers = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        seps = np.sqrt(2.0) * deltas
        c, d = np.meshgrid(centers, seps)
        return np.stack([c - d / 2.0, c + d / 2.0], axis=-1).reshape(-1, 2)
    if domain.kind == "disk":
        angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
        r = domain.radius - deltas
        rr, th = np.meshgrid(r, angles)
        return np.stack([rr * np.cos(th), rr * np.sin(th)], axis=-1).reshape(-1, 2)
    return np.empty((0, domain.dim))


def _far_field_points(domain, rhos):
    """Points at |x| of the prescribed magnitudes, fixed directions."""
    rhos = np.asarray(rhos, dtype=float)
    if rhos.size == 0:
        return np.empty((0, domain.dim))
    if domain.kind == "interval":
        pts = rhos[(rhos > domain.a) & (rhos < domain.b)]
        return pts[:, None]
    if domain.kind == "half_plane_order":
        seps = np.array([0.5, 1.0, 2.0])
        out = []
        for rho in rhos:
            for c in (-rho, rho):
                for d in seps:
                    out.append([c - d / 2.0, c + d / 2.0])
        return np.asarray(out)
    if domain.kind == "disk":
        return np.empty((0, 2))
    if domain.kind == "all_space":
        dirs = np.concatenate([np.eye(domain.dim), -np.eye(domain.dim),
                               np.ones((1, domain.dim)) / np.sqrt(domain.dim)])
        return (rhos[:, None, None] * dirs[None, :, :]).reshape(-1, domain.dim)
    return np.empty((0, domain.dim))


def _shell_complement_points(domain, k, deltas_master, rhos_master):
    """Probe points of X \\ X_k, nested across k by construction.

    Near-boundary probes keep distances <= 1/k from the master grid and
    far-field probes keep magnitudes >= k, so the probe set for k+1 is a
    subset of the one for k and sampled minima are monotone.
    """
    shell = ShellFamily(domain=domain, k=k)
    parts = []
    if domain.has_boundary:
        parts.append(_boundary_offset_points(domain, deltas_master[deltas_master <= 1.0 / k]))
    parts.append(_far_field_points(domain, rhos_master[rhos_master >= k]))
    pts = np.concatenate([p for p in parts if len(p)]) if any(len(p) for p in parts) else np.empty((0, domain.dim))
    if len(pts):
        keep = shell.complement_contains(pts)
        pts = pts[keep]
    return pts


# ---------------------------------------------------------------------------
# p1 / p2 verification


@dataclass
class ShellEstimate:
    k: int
    n_points: int
    v_min: float


@dataclass
class P1Report:
    shells: list
    passed: bool


@dataclass
class P2Report:
    C_fit: float
    D_fit: float
    max_violation: float
    passed: bool


def verify_p1(
    model: Model, cand=None, ks=DEFAULT_SHELL_KS, samples_per_shell=48
) -> P1Report:
    """Estimate inf V over the shell complements and test unbounded growth.

    PASS requires the per-shell minima to be non-decreasing (they are by
    construction, up to rounding, since the probe sets are nested) and
    the last minimum to exceed ten times the first.
    """
    if cand is None:
        cand = LyapunovCandidate.from_model(model)
    elif not isinstance(cand, LyapunovCandidate):
        cand = LyapunovCandidate(*cand)
    domain = model.domain
    if domain.has_boundary:
        if domain.kind == "interval":
            d_cap = 0.499 * (domain.b - domain.a)
        elif domain.kind == "disk":
            d_cap = 0.999 * domain.radius
        else:
            d_cap = 5.0
        deltas_master = np.geomspace(1e-4, d_cap, samples_per_shell)
    else:
        deltas_master = np.empty(0)
    rhos_master = np.geomspace(1.0, 1024.0, 64)

    shells = []
    for k in ks:
        pts = _shell_complement_points(domain, k, deltas_master, rhos_master)
        if len(pts) == 0:
            raise SamplingFailure(
                f"shell complement for k={k} has no representable probe points"
            )
        vals = np.asarray(cand.V(pts), dtype=float)
        shells.append(ShellEstimate(k=int(k), n_points=len(pts), v_min=float(np.min(vals))))

    mins = np.array([s.v_min for s in shells])
    monotone = bool(np.all(mins[1:] >= mins[:-1] * (1.0 - 1e-9) - 1e-300))
    unbounded = bool(mins[-1] > 10.0 * mins[0]) if mins[0] > 0 else bool(mins[-1] > 0)
    if mins[0] == 0.0 and mins[-1] == 0.0:
        unbounded = False
    return P1Report(shells=shells, passed=monotone and unbounded)


def _default_p2_grids(domain):
    if domain.kind == "interval":
        span = domain.b - domain.a
        core = np.linspace(domain.a + 0.05 * span, domain.b - 0.05 * span, 400)[:, None]
    elif domain.kind == "half_plane_order":
        seps = np.geomspace(0.05, 4.0, 20)
        centers = np.linspace(-2.0, 2.0, 20)
        c, d = np.meshgrid(centers, seps)
        core = np.stack([c - d / 2.0, c + d / 2.0], axis=-1).reshape(-1, 2)
    elif domain.kind == "disk":
        core = domain.interior_grid(count=400, margin=0.1)
    else:
        core = np.concatenate(
            [domain.interior_grid(count=256), _far_field_points(domain, np.linspace(0.5, 4.0, 8))]
        )
    deltas = np.array(BOUNDARY_PROBE_DISTANCES)
    edge_parts = [_boundary_offset_points(domain, deltas)] if domain.has_boundary else []
    edge_parts.append(_far_field_points(domain, np.geomspace(4.0, 4096.0, 11)))
    edge = np.concatenate([p for p in edge_parts if len(p)])
    edge = edge[domain.contains(edge)]
    return core, edge


def verify_p2(
    model: Model, cand=None, core_grid=None, edge_grid=None, c_grid=P2_C_GRID
) -> P2Report:
    """Search for constants with L V <= C V + D on the probe grids.

    For each candidate C the offset D is the worst residual on the
    interior core grid; the pair passes when the bound then holds on the
    near-boundary / far-field edge grid as well.  An unbounded L V / V
    ratio shows up as an irreparable edge violation.
    """
    if cand is None:
        cand = LyapunovCandidate.from_model(model)
    elif not isinstance(cand, LyapunovCandidate):
        cand = LyapunovCandidate(*cand)
    if core_grid is None or edge_grid is None:
        core_default, edge_default = _default_p2_grids(model.domain)
        core_grid = core_default if core_grid is None else core_grid
        edge_grid = edge_default if edge_grid is None else edge_grid
    core_grid = np.atleast_2d(np.asarray(core_grid, dtype=float))
    edge_grid = np.atleast_2d(np.asarray(edge_grid, dtype=float))

    LV_core = np.array([apply_generator(model, cand, x) for x in core_grid])
    V_core = np.asarray(cand.V(core_grid), dtype=float)
    LV_edge = np.array([apply_generator(model, cand, x) for x in edge_grid])
    V_edge = np.asarray(cand.V(edge_grid), dtype=float)

    best = None
    for C in c_grid:
        D = max(0.0, float(np.max(LV_core - C * V_core)))
        violation = float(np.max(LV_edge - C * V_edge - D))
        tol = 1e-8 * (1.0 + abs(D))
        if violation <= tol:
            return P2Report(C_fit=C, D_fit=D, max_violation=violation, passed=True)
        if best is None or violation < best[2]:
            best = (C, D, violation)
    C_fit, D_fit, max_violation = best
    return P2Report(C_fit=C_fit, D_fit=D_fit, max_violation=max_violation, passed=False)


def non_explosivity_report(model: Model, cand=None, ks=DEFAULT_SHELL_KS) -> dict:
    """Combined p1/p2 report, JSON-serializable."""
    p1 = verify_p1(model, cand, ks=ks)
    p2 = verify_p2(model, cand)
    return {
        "model": model.name,
        "p1": [asdict(s) for s in p1.shells],
        "p1_pass": p1.passed,
        "p2": {"C": p2.C_fit, "D": p2.D_fit, "max_violation": p2.max_violation},
        "p2_pass": p2.passed,
        "pass": bool(p1.passed and p2.passed),
    }
