"""Model definitions: coefficient bundles (F, gamma, sigma) on open domains.

A :class:`Model` packages everything an integrator or drift computation
needs: force, friction and noise-coefficient maps, the open domain the
position lives in, and optional analytic derivatives.  The built-in
models all obey the fluctuation-dissipation relation

    sigma(x) sigma(x)^T = 2 kBT gamma(x),

with scalar (isotropic) friction gamma(x) = kBT / D(x) I defined through
a diffusion profile D.  Coefficient callables are vectorized: positions
are arrays of shape (..., n).

Built-ins
---------
``wall-gravity``     1D particle between soft walls under gravity and
                     double-layer forces, hindered diffusion vanishing at
                     both walls.
``dlvo-pair``        two particles on a line with screened-Coulomb (DLVO)
                     repulsion inside a shallow harmonic trap; diffusion
                     depends on the separation and vanishes at contact.
``rotational-pore``  2D particle in a circular pore with a rotational
                     (non-conservative) force field.
``constant``         constant-coefficient benchmark (gamma = g I,
                     sigma = s I, F = -k x) with zero noise-induced drift.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainMismatch, ParameterDomain
from .lyapunov import friction_inverse, isotropic_noise_drift, noise_induced_drift

__all__ = [
    "DomainSpec",
    "DiffusionProfile",
    "IsotropicCoefficients",
    "Model",
    "interval",
    "half_plane_order",
    "disk",
    "all_space",
    "from_fluctuation_dissipation",
    "builtin_diffusion_model1",
    "wall_gravity_model",
    "dlvo_pair_model",
    "rotational_pore_model",
    "constant_model",
    "build_model",
    "model_from_spec",
    "model_to_spec",
    "limiting_drift",
    "limiting_diffusion",
    "BUILTIN_MODELS",
]


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class DomainSpec:
    """Open domain with a signed boundary-distance function.

    ``kind`` is one of ``interval`` (a, b), ``half_plane_order``
    (x1 < x2), ``disk`` (|x| < radius) or ``all_space``.  Membership is
    defined as ``boundary_distance(x) > 0`` so the two can never
    disagree.
    """

    kind: str
    dim: int
    a: float = 0.0
    b: float = 0.0
    radius: float = 0.0

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "interval":
            xi = x[..., 0]
            return np.minimum(xi - self.a, self.b - xi)
        if self.kind == "half_plane_order":
            return (x[..., 1] - x[..., 0]) / np.sqrt(2.0)
        if self.kind == "disk":
            return self.radius - np.linalg.norm(x, axis=-1)
        if self.kind == "all_space":
            finite = np.isfinite(x).all(axis=-1)
            return np.where(finite, np.inf, -np.inf)
        raise ValueError(f"unknown domain kind {self.kind!r}")

    def contains(self, x):
        return self.boundary_distance(x) > 0.0

    @property
    def has_boundary(self):
        return self.kind != "all_space"

    def interior_grid(self, count=1000, margin=1e-3):
        """Deterministic grid of interior points for probing and validation."""
        if self.kind == "interval":
            span = self.b - self.a
            xs = np.linspace(self.a + margin * span, self.b - margin * span, count)
            return xs[:, None]
        if self.kind == "half_plane_order":
            m = max(2, int(np.sqrt(count)))
            seps = np.geomspace(max(margin, 1e-3), 5.0, m)
            centers = np.linspace(-3.0, 3.0, m)
            d, c = np.meshgrid(seps, centers)
            pts = np.stack([c - d / 2.0, c + d / 2.0], axis=-1)
            return pts.reshape(-1, 2)[:count]
        if self.kind == "disk":
            idx = np.arange(count)
            r = self.radius * (1.0 - margin) * np.sqrt((idx + 0.5) / count)
            theta = idx * (np.pi * (3.0 - np.sqrt(5.0)))
            return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        if self.kind == "all_space":
            rng = np.random.default_rng(12345)
            return rng.standard_normal((count, self.dim)) * 1.5
        raise ValueError(f"unknown domain kind {self.kind!r}")

    def sample_interior(self, rng, count=100):
        """Random interior points; used by consistency and spot checks."""
        pts = self.interior_grid(count=4 * count)
        take = rng.choice(len(pts), size=count, replace=False)
        return pts[take]


def interval(a: float, b: float) -> DomainSpec:
    if not (0.0 <= a < b < np.inf):
        raise ParameterDomain("interval requires 0 <= a < b < inf")
    return DomainSpec(kind="interval", dim=1, a=float(a), b=float(b))


def half_plane_order() -> DomainSpec:
    return DomainSpec(kind="half_plane_order", dim=2)


def disk(radius: float) -> DomainSpec:
    if not radius > 0.0:
        raise ParameterDomain("disk radius must be positive")
    return DomainSpec(kind="disk", dim=2, radius=float(radius))


def all_space(dim: int) -> DomainSpec:
    return DomainSpec(kind="all_space", dim=int(dim))


# ---------------------------------------------------------------------------
# Coefficient containers


@dataclass(frozen=True)
class DiffusionProfile:
    """Scalar diffusion coefficient D(s) > 0 with derivative, at temperature kBT.

    ``s`` is the scalar coordinate the profile depends on (the position
    itself in 1D, the particle separation or the squared radius in the
    2D models).
    """

    D: Callable
    D_prime: Callable
    kBT: float = 1.0


@dataclass(frozen=True)
class IsotropicCoefficients:
    """Vectorized scalar coefficients for models with gamma(x) = g(x) I.

    ``bundle(x)`` returns ``(g, sigma_sq, grad_g)`` with shapes
    (...,), (...,), (..., n) for positions of shape (..., n);
    ``sigma_sq`` is the scalar s2 in sigma sigma^T = s2 I.
    """

    bundle: Callable

    def g(self, x):
        return self.bundle(x)[0]

    def sigma_sq(self, x):
        return self.bundle(x)[1]

    def grad_g(self, x):
        return self.bundle(x)[2]


@dataclass(frozen=True)
class Model:
    """Coefficient bundle defining one Langevin system on an open domain.

    ``force`` is vectorized over (..., n) positions.  ``friction`` and
    ``diffusion`` return single-point matrices of shape (n, n) and
    (n, k).  ``analytic_friction_grad`` (optional) returns the tensor
    d gamma_ij / dx_l indexed [l, i, j].  ``lyapunov_fn`` (optional) is a
    (V, grad V, hess V) triple of vectorized callables used by the
    non-explosivity checks.  ``iso`` (optional) carries the scalar
    coefficient fast path used by the batch integrators.
    """

    name: str
    dim_n: int
    dim_k: int
    force: Callable
    friction: Callable
    diffusion: Callable
    domain: DomainSpec
    analytic_friction_grad: Optional[Callable] = None
    lyapunov_fn: Optional[tuple] = None
    iso: Optional[IsotropicCoefficients] = None
    analytic_noise_drift: Optional[Callable] = None
    params: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Fluctuation-dissipation construction


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0.0:
            raise ParameterDomain(f"parameter {name} must be positive, got {value}")


def from_fluctuation_dissipation(
    profile: DiffusionProfile,
    force: Callable,
    domain: DomainSpec,
    n: int,
    coordinate: Optional[Callable] = None,
    coordinate_grad: Optional[Callable] = None,
    name: str = "custom",
    params: Optional[dict] = None,
    analytic_noise_drift: Optional[Callable] = None,
    lyapunov_fn: Optional[tuple] = None,
) -> Model:
    """Build a model with gamma = (kBT / D) I and sigma = sqrt(2 kBT^2 / D) I.

    The construction guarantees sigma sigma^T = 2 kBT gamma exactly.
    ``coordinate`` maps a position to the scalar argument of the
    diffusion profile (identity in 1D); ``coordinate_grad`` is its
    gradient.

    Raises ``DomainMismatch`` when the profile is non-positive or
    non-finite somewhere on a probe grid of the domain.
    """
    kBT = profile.kBT
    _require_positive(kBT=kBT)
    if coordinate is None:
        if n != 1:
            raise ParameterDomain("coordinate map required for n > 1")
        coordinate = lambda x: np.asarray(x, dtype=float)[..., 0]
        coordinate_grad = lambda x: np.ones_like(np.asarray(x, dtype=float))
    if coordinate_grad is None:
        raise ParameterDomain("coordinate_grad required alongside coordinate")

    probe = domain.interior_grid(count=64)
    D_probe = profile.D(coordinate(probe))
    if not (np.all(np.isfinite(D_probe)) and np.all(D_probe > 0.0)):
        raise DomainMismatch("diffusion profile must be finite and positive on the domain")

    def bundle(x):
        x = np.asarray(x, dtype=float)
        s = coordinate(x)
        D = profile.D(s)
        Dp = profile.D_prime(s)
        g = kBT / D
        sigma_sq = 2.0 * kBT * g
        grad_g = (-kBT * Dp / D**2)[..., None] * coordinate_grad(x)
        return g, sigma_sq, grad_g

    iso = IsotropicCoefficients(bundle=bundle)
    eye = np.eye(n)

    def friction(x):
        return iso.g(x) * eye

    def diffusion(x):
        return np.sqrt(iso.sigma_sq(x)) * eye

    def friction_grad(x):
        grad_g = iso.grad_g(x)
        return grad_g[:, None, None] * eye

    return Model(
        name=name,
        dim_n=n,
        dim_k=n,
        force=force,
        friction=friction,
        diffusion=diffusion,
        domain=domain,
        analytic_friction_grad=friction_grad,
        lyapunov_fn=lyapunov_fn,
        iso=iso,
        analytic_noise_drift=analytic_noise_drift,
        params=dict(params or {}),
    )


# ---------------------------------------------------------------------------
# Built-in diffusion profiles


def builtin_diffusion_model1(a, b, D_max=1.0, kBT=1.0) -> DiffusionProfile:
    """Hindered-diffusion profile vanishing at both walls of (a, b).

    D(x) = D_max sin^2(pi (x - a) / (b - a)); C-infinity, zero at both
    endpoints, single interior maximum D_max at the midpoint, derivative
    positive left of the midpoint and negative right of it.
    """
    if not a < b:
        raise ParameterDomain("requires a < b")
    _require_positive(D_max=D_max, kBT=kBT)
    span = b - a

    def D(x):
        return D_max * np.sin(np.pi * (np.asarray(x, dtype=float) - a) / span) ** 2

    def D_prime(x):
        return D_max * (np.pi / span) * np.sin(
            2.0 * np.pi * (np.asarray(x, dtype=float) - a) / span
        )

    return DiffusionProfile(D=D, D_prime=D_prime, kBT=kBT)


def saturating_diffusion(D_SE=1.0, alpha=1.0, kBT=1.0) -> DiffusionProfile:
    """Separation-dependent diffusion D(d) = D_SE (1 - exp(-alpha d)).

    Vanishes at contact, increases concavely and saturates at the free
    Stokes-Einstein value for large separation.
    """
    _require_positive(D_SE=D_SE, alpha=alpha, kBT=kBT)

    def D(d):
        return D_SE * (1.0 - np.exp(-alpha * np.asarray(d, dtype=float)))

    def D_prime(d):
        return D_SE * alpha * np.exp(-alpha * np.asarray(d, dtype=float))

    return DiffusionProfile(D=D, D_prime=D_prime, kBT=kBT)


def pore_diffusion(C_radius=1.0, D0=1.0, beta=0.5, kBT=1.0) -> DiffusionProfile:
    """Radial diffusion profile for the pore model, argument s = r^2.

    D(s) = D0 (1 - s/C^2)(1 + beta s/C^2) vanishes at the pore wall and
    has strictly negative first and second derivatives on [0, C^2] for
    0 < beta < 1.
    """
    _require_positive(C_radius=C_radius, D0=D0, kBT=kBT)
    if not 0.0 < beta < 1.0:
        raise ParameterDomain("beta must lie in (0, 1)")
    C2 = C_radius**2

    def D(s):
        u = np.asarray(s, dtype=float) / C2
        return D0 * (1.0 - u) * (1.0 + beta * u)

    def D_prime(s):
        u = np.asarray(s, dtype=float) / C2
        return (D0 / C2) * (beta - 1.0 - 2.0 * beta * u)

    return DiffusionProfile(D=D, D_prime=D_prime, kBT=kBT)


# ---------------------------------------------------------------------------
# Built-in models


def wall_gravity_model(
    a=0.0,
    b=1.0,
    B=5.0,
    kappa=10.0,
    lam=100.0,
    G_eff=1.0,
    kBT=1.0,
    D_profile: Optional[DiffusionProfile] = None,
    D_max=1.0,
) -> Model:
    """1D particle between soft walls with double-layer forces and gravity.

    Potential (five terms): two double-layer exponentials with prefactor
    B and inverse decay length kappa, a linear gravity term G_eff x, and
    two fast-decaying soft-wall terms exp(-lam (x-a))/(x-a) and
    exp(-lam (b-x))/(b-x) enforcing confinement to (a, b).
    """
    if not (0.0 <= a < b):
        raise ParameterDomain("requires 0 <= a < b")
    _require_positive(B=B, kappa=kappa, lam=lam, kBT=kBT)
    if lam < 10.0 * kappa:
        warnings.warn(
            "soft-wall decay lam should dominate the double-layer decay "
            f"(lam >= 10 kappa); got lam={lam}, kappa={kappa}",
            stacklevel=2,
        )
    if D_profile is None:
        D_profile = builtin_diffusion_model1(a, b, D_max=D_max, kBT=kBT)
    elif D_profile.kBT != kBT:
        raise ParameterDomain("D_profile.kBT must match the model kBT")

    def U(x):
        x = np.asarray(x, dtype=float)
        da, db = x - a, b - x
        return (
            (B / kappa) * np.exp(-kappa * da)
            + (B / kappa) * np.exp(-kappa * db)
            + G_eff * x
            + np.exp(-lam * da) / da
            + np.exp(-lam * db) / db
        )

    def dU(x):
        x = np.asarray(x, dtype=float)
        da, db = x - a, b - x
        ea, eb = np.exp(-lam * da), np.exp(-lam * db)
        return (
            -B * np.exp(-kappa * da)
            + B * np.exp(-kappa * db)
            + G_eff
            - ea * (lam / da + 1.0 / da**2)
            + eb * (lam / db + 1.0 / db**2)
        )

    def d2U(x):
        x = np.asarray(x, dtype=float)
        da, db = x - a, b - x
        ea, eb = np.exp(-lam * da), np.exp(-lam * db)
        return (
            kappa * B * np.exp(-kappa * da)
            + kappa * B * np.exp(-kappa * db)
            + ea * (lam**2 / da + 2.0 * lam / da**2 + 2.0 / da**3)
            + eb * (lam**2 / db + 2.0 * lam / db**2 + 2.0 / db**3)
        )

    def force(x):
        x = np.asarray(x, dtype=float)
        return -dU(x[..., 0])[..., None]

    lyapunov_fn = (
        lambda x: U(np.asarray(x, dtype=float)[..., 0]),
        lambda x: dU(np.asarray(x, dtype=float)[..., 0])[..., None],
        lambda x: d2U(np.asarray(x, dtype=float)[..., 0])[..., None, None],
    )

    def analytic_drift(x):
        return D_profile.D_prime(np.asarray(x, dtype=float)[..., 0])[..., None]

    model = from_fluctuation_dissipation(
        D_profile,
        force,
        interval(a, b),
        n=1,
        name="wall-gravity",
        params={
            "a": a, "b": b, "B": B, "kappa": kappa, "lam": lam,
            "G_eff": G_eff, "kBT": kBT, "D_max": D_max,
        },
        analytic_noise_drift=analytic_drift,
        lyapunov_fn=lyapunov_fn,
    )
    return model


def dlvo_pair_model(
    k_spring=0.5,
    c=5.0,
    l=0.5,
    kBT=1.0,
    D_SE=1.0,
    alpha=1.0,
    D_profile: Optional[DiffusionProfile] = None,
) -> Model:
    """Two particles on a line with DLVO repulsion in a harmonic trap.

    Potential U = (k/2)(x1^2 + x2^2) + c exp(-d/l)/d with separation
    d = x2 - x1 > 0; friction kBT / D(d) I with a separation-dependent
    diffusion coefficient vanishing at contact.
    """
    _require_positive(k_spring=k_spring, c=c, l=l, kBT=kBT)
    if D_profile is None:
        D_profile = saturating_diffusion(D_SE=D_SE, alpha=alpha, kBT=kBT)
    elif D_profile.kBT != kBT:
        raise ParameterDomain("D_profile.kBT must match the model kBT")

    def dlvo_prime(d):
        return -c * np.exp(-d / l) / d * (1.0 / l + 1.0 / d)

    def dlvo_second(d):
        return c * np.exp(-d / l) / d * (1.0 / l**2 + 2.0 / (l * d) + 2.0 / d**2)

    def separation(x):
        x = np.asarray(x, dtype=float)
        return x[..., 1] - x[..., 0]

    def separation_grad(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = -1.0
        out[..., 1] = 1.0
        return out

    def U(x):
        x = np.asarray(x, dtype=float)
        d = separation(x)
        quad = 0.5 * k_spring * (x[..., 0] ** 2 + x[..., 1] ** 2)
        return quad + c * np.exp(-d / l) / d

    def grad_U(x):
        x = np.asarray(x, dtype=float)
        d = separation(x)
        up = dlvo_prime(d)
        out = np.empty_like(x)
        out[..., 0] = k_spring * x[..., 0] - up
        out[..., 1] = k_spring * x[..., 1] + up
        return out

    def hess_U(x):
        x = np.asarray(x, dtype=float)
        upp = dlvo_second(d := separation(x))
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = k_spring + upp
        out[..., 1, 1] = k_spring + upp
        out[..., 0, 1] = -upp
        out[..., 1, 0] = -upp
        return out

    def force(x):
        return -grad_U(x)

    def analytic_drift(x):
        dp = D_profile.D_prime(separation(x))
        out = np.empty_like(np.asarray(x, dtype=float))
        out[..., 0] = -dp
        out[..., 1] = dp
        return out

    return from_fluctuation_dissipation(
        D_profile,
        force,
        half_plane_order(),
        n=2,
        coordinate=separation,
        coordinate_grad=separation_grad,
        name="dlvo-pair",
        params={
            "k_spring": k_spring, "c": c, "l": l, "kBT": kBT,
            "D_SE": D_SE, "alpha": alpha,
        },
        analytic_noise_drift=analytic_drift,
        lyapunov_fn=(U, grad_U, hess_U),
    )


def rotational_pore_model(
    C_radius=1.0,
    B=5.0,
    kappa=10.0,
    Omega=1.0,
    kBT=1.0,
    D0=1.0,
    beta=0.5,
    D_profile: Optional[DiffusionProfile] = None,
) -> Model:
    """2D particle in a circular pore with a rotational force field.

    Radially symmetric confining potential U(x) = u(r^2) with
    u(s) = B exp(-kappa (C^2 - s)) / (kappa (C^2 - s)), plus the
    divergence-free rotational force gamma(x) Omega (-x2, x1) which has
    no potential.  Friction kBT / D(r^2) I with a radial diffusion
    profile vanishing at the pore wall.
    """
    _require_positive(C_radius=C_radius, B=B, kappa=kappa, kBT=kBT)
    if D_profile is None:
        D_profile = pore_diffusion(C_radius=C_radius, D0=D0, beta=beta, kBT=kBT)
    elif D_profile.kBT != kBT:
        raise ParameterDomain("D_profile.kBT must match the model kBT")
    C2 = C_radius**2

    def u(s):
        w = C2 - np.asarray(s, dtype=float)
        return (B / (kappa * w)) * np.exp(-kappa * w)

    def u_prime(s):
        w = C2 - np.asarray(s, dtype=float)
        return B * np.exp(-kappa * w) * (1.0 / (kappa * w**2) + 1.0 / w)

    def u_second(s):
        w = C2 - np.asarray(s, dtype=float)
        return B * np.exp(-kappa * w) * (
            kappa / w + 2.0 / w**2 + 2.0 / (kappa * w**3)
        )

    def radius_sq(x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] ** 2 + x[..., 1] ** 2

    def radius_sq_grad(x):
        return 2.0 * np.asarray(x, dtype=float)

    def rotation(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = -x[..., 1]
        out[..., 1] = x[..., 0]
        return out

    def force(x):
        x = np.asarray(x, dtype=float)
        s = radius_sq(x)
        g = kBT / D_profile.D(s)
        return -u_prime(s)[..., None] * 2.0 * x + (g * Omega)[..., None] * rotation(x)

    def U(x):
        return u(radius_sq(x))

    def grad_U(x):
        x = np.asarray(x, dtype=float)
        return u_prime(radius_sq(x))[..., None] * 2.0 * x

    def hess_U(x):
        x = np.asarray(x, dtype=float)
        s = radius_sq(x)
        up, upp = u_prime(s), u_second(s)
        eye = np.eye(2)
        outer = x[..., :, None] * x[..., None, :]
        return 2.0 * up[..., None, None] * eye + 4.0 * upp[..., None, None] * outer

    def analytic_drift(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * D_profile.D_prime(radius_sq(x))[..., None] * x

    return from_fluctuation_dissipation(
        D_profile,
        force,
        disk(C_radius),
        n=2,
        coordinate=radius_sq,
        coordinate_grad=radius_sq_grad,
        name="rotational-pore",
        params={
            "C_radius": C_radius, "B": B, "kappa": kappa, "Omega": Omega,
            "kBT": kBT, "D0": D0, "beta": beta,
        },
        analytic_noise_drift=analytic_drift,
        lyapunov_fn=(U, grad_U, hess_U),
    )


def constant_model(n=1, friction=1.0, k_spring=1.0, kBT=1.0) -> Model:
    """Constant-coefficient benchmark: gamma = g I, F = -k x, sigma from FD.

    State-independent friction means the noise-induced drift vanishes
    identically, making this the reference system for integrator and
    coupling tests.
    """
    _require_positive(friction=friction, kBT=kBT)
    if not k_spring >= 0.0:
        raise ParameterDomain("k_spring must be nonnegative")
    n = int(n)
    g0 = float(friction)
    s2 = 2.0 * kBT * g0
    eye = np.eye(n)

    def bundle(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        return (
            np.full(shape, g0),
            np.full(shape, s2),
            np.zeros(x.shape),
        )

    def V(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * k_spring * (x**2).sum(axis=-1)

    return Model(
        name="constant",
        dim_n=n,
        dim_k=n,
        force=lambda x: -k_spring * np.asarray(x, dtype=float),
        friction=lambda x: g0 * eye,
        diffusion=lambda x: np.sqrt(s2) * eye,
        domain=all_space(n),
        analytic_friction_grad=lambda x: np.zeros((n, n, n)),
        lyapunov_fn=(
            V,
            lambda x: k_spring * np.asarray(x, dtype=float),
            lambda x: k_spring
            * np.broadcast_to(eye, np.asarray(x, dtype=float).shape + (n,)),
        ),
        iso=IsotropicCoefficients(bundle=bundle),
        analytic_noise_drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        params={"n": n, "friction": friction, "k_spring": k_spring, "kBT": kBT},
    )


BUILTIN_MODELS = {
    "wall-gravity": wall_gravity_model,
    "dlvo-pair": dlvo_pair_model,
    "rotational-pore": rotational_pore_model,
    "constant": constant_model,
}


def build_model(name: str, **params) -> Model:
    if name not in BUILTIN_MODELS:
        known = ", ".join(sorted(BUILTIN_MODELS))
        raise ParameterDomain(f"unknown model {name!r}; built-ins: {known}")
    return BUILTIN_MODELS[name](**params)


def model_from_spec(spec) -> Model:
    """Build a model from {"model": name, "params": {...}} (dict or JSON str)."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    return build_model(spec["model"], **spec.get("params", {}))


def model_to_spec(model: Model) -> dict:
    return {"model": model.name, "params": dict(model.params)}


# ---------------------------------------------------------------------------
# Limiting-equation coefficients


def limiting_drift(model: Model, x):
    """Drift gamma^{-1} F + S of the small-mass limit at a single point."""
    x = np.asarray(x, dtype=float)
    ginv = friction_inverse(model.friction(x))
    return ginv @ np.asarray(model.force(x), dtype=float) + noise_induced_drift(model, x)


def limiting_diffusion(model: Model, x):
    """Noise coefficient gamma^{-1} sigma of the small-mass limit."""
    x = np.asarray(x, dtype=float)
    return friction_inverse(model.friction(x)) @ np.asarray(
        model.diffusion(x), dtype=float
    )


def limiting_drift_batch(model: Model, x):
    """Vectorized limiting drift for isotropic models (batch integrator path)."""
    iso = model.iso
    if iso is None:
        raise ValueError("batch drift requires isotropic coefficients")
    x = np.asarray(x, dtype=float)
    g, sigma_sq, grad_g = iso.bundle(x)
    F = np.asarray(model.force(x), dtype=float)
    return F / g[..., None] + isotropic_noise_drift(g, grad_g, sigma_sq)
