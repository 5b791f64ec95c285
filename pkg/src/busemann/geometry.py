"""Poincaré ball primitives at unit curvature.

Every function accepts a single point of shape ``(d,)`` or a batch of
shape ``(..., d)``; reductions run over the last axis.  Arithmetic is
float64 throughout.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InvalidInputError

EPS_BALL = 1e-5
"""Margin kept between embeddings and the boundary: ``||z|| <= 1 - EPS_BALL``."""


def as_vector(x, name: str = "x") -> np.ndarray:
    """Convert ``x`` to a float64 array with at least one axis, rejecting NaN/inf."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] < 1:
        raise InvalidInputError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def ideal_point(coords) -> np.ndarray:
    """Normalize ``coords`` onto the unit sphere (the ideal boundary)."""
    p = as_vector(coords, "ideal point")
    n = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise InvalidInputError("ideal point has zero norm, direction undefined")
    return p / n


def boundary_gap(z: np.ndarray) -> np.ndarray:
    """``1 - ||z||^2`` evaluated as ``(1 - ||z||)(1 + ||z||)``.

    The factored form is exact in ``1 - ||z||`` for norms close to one,
    where the naive subtraction loses most of its digits.
    """
    n = np.linalg.norm(z, axis=-1)
    return (1.0 - n) * (1.0 + n)


def _check_inside(z: np.ndarray, name: str) -> np.ndarray:
    n = np.linalg.norm(z, axis=-1)
    if np.any(n >= 1.0):
        raise DomainError(f"{name} lies on or outside the unit ball (norm {np.max(n)!r})")
    return n


def exp0(x, eps: float = EPS_BALL) -> np.ndarray:
    """Exponential map at the origin, ``tanh(||x||/2) x / ||x||``.

    The radius is capped at ``1 - eps`` once ``tanh`` saturates.  At
    ``x = 0`` the continuous extension (the origin) is returned.
    """
    x = as_vector(x)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    radius = np.minimum(np.tanh(n / 2.0), 1.0 - eps)
    safe = np.where(n > 0.0, n, 1.0)
    return np.where(n > 0.0, radius * x / safe, 0.0)


def project_to_ball(x, eps: float = EPS_BALL) -> np.ndarray:
    """Rescale ``x`` to norm ``1 - eps`` if it lies beyond that radius."""
    if not (0.0 < eps <= 1e-2):
        raise InvalidInputError(f"eps must lie in (0, 1e-2], got {eps!r}")
    x = as_vector(x)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    limit = 1.0 - eps
    scale = np.where(n > limit, limit / np.where(n > 0.0, n, 1.0), 1.0)
    return x * scale


def _arcosh1p(u: np.ndarray) -> np.ndarray:
    # arcosh(1 + u) without the cancellation of forming 1 + u for small u
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def geodesic_distance(z1, z2) -> np.ndarray | float:
    """Hyperbolic distance between two points of the open unit ball."""
    z1 = as_vector(z1, "z1")
    z2 = as_vector(z2, "z2")
    _check_inside(z1, "z1")
    _check_inside(z2, "z2")
    diff = np.sum((z1 - z2) ** 2, axis=-1)
    u = 2.0 * diff / (boundary_gap(z1) * boundary_gap(z2))
    out = _arcosh1p(u)
    return float(out) if np.ndim(out) == 0 else out


def geodesic_ray(p, t: float) -> np.ndarray:
    """Point at arc length ``t`` on the unit-speed ray from the origin toward ``p``.

    No boundary clamp is applied, so large ``t`` may give norms above
    ``1 - EPS_BALL``; the result is still strictly inside the ball for any
    finite ``t`` until ``tanh`` rounds to one (``t`` around 38).
    """
    if not np.isfinite(t) or t < 0.0:
        raise DomainError(f"ray parameter must be a finite t >= 0, got {t!r}")
    return ideal_point(p) * np.tanh(t / 2.0)


def busemann(p, z) -> np.ndarray | float:
    """Closed-form Busemann function ``log(||p - z||^2 / (1 - ||z||^2))``."""
    p = ideal_point(p)
    z = as_vector(z, "z")
    _check_inside(z, "z")
    num = np.sum((p - z) ** 2, axis=-1)
    out = np.log(num / boundary_gap(z))
    # at the origin ||p||^2 = 1 only up to rounding; the value is exactly zero
    out = np.where(np.any(z != 0.0, axis=-1), out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def busemann_limit(p, z, t: float) -> np.ndarray | float:
    """Finite-``t`` approximation ``d(ray(p, t), z) - t`` of the Busemann function.

    ``1 - ||ray(p, t)||^2`` is taken as ``sech(t/2)^2`` rather than from the
    rounded ray point, which keeps the result accurate for ``t`` up to
    a few dozen.
    """
    if not np.isfinite(t) or t <= 0.0:
        raise DomainError(f"limit parameter must be a finite t > 0, got {t!r}")
    p = ideal_point(p)
    z = as_vector(z, "z")
    _check_inside(z, "z")
    ray = p * np.tanh(t / 2.0)
    diff = np.sum((ray - z) ** 2, axis=-1)
    ray_gap = 1.0 / np.cosh(t / 2.0) ** 2
    u = 2.0 * diff / (ray_gap * boundary_gap(z))
    out = _arcosh1p(u) - t
    return float(out) if np.ndim(out) == 0 else out
