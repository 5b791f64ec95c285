"""Penalized Busemann loss and its gradient through the exponential map."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidInputError, NumericError
from .geometry import EPS_BALL, as_vector, boundary_gap, busemann, ideal_point


@dataclass(frozen=True)
class PenaltyConfig:
    """Linear penalty schedule ``phi = slope * dimension``."""

    slope: float
    dimension: int

    def __post_init__(self):
        if self.slope < 0 or self.dimension < 1:
            raise InvalidInputError(
                f"need slope >= 0 and dimension >= 1, got {self.slope}, {self.dimension}"
            )

    @property
    def phi(self) -> float:
        return phi_linear(self.dimension, self.slope)


@dataclass(frozen=True)
class LossGradient:
    value: float
    grad: np.ndarray


def phi_linear(d: int, s: float) -> float:
    """Penalty weight for an embedding of dimension ``d`` at slope ``s``."""
    if d < 1 or s < 0:
        raise InvalidInputError(f"phi_linear needs d >= 1 and s >= 0, got d={d}, s={s}")
    return float(s * d)


def _check_phi(phi: float) -> None:
    if not np.isfinite(phi) or phi < 0:
        raise InvalidInputError(f"penalty phi must be finite and >= 0, got {phi!r}")


def penalized_busemann_loss(z, p, phi: float):
    """``b_p(z) - phi * log(1 - ||z||^2)`` for points ``z`` inside the ball."""
    _check_phi(phi)
    z = as_vector(z, "z")
    out = busemann(p, z) - phi * np.log(boundary_gap(z))
    return float(out) if np.ndim(out) == 0 else out


def _loss_and_grad(X: np.ndarray, P: np.ndarray, phi: float, eps: float = EPS_BALL):
    """Row-wise loss and d(loss)/dX for pre-exponential outputs ``X``.

    ``P`` holds the matching unit prototypes row by row.  The gradient is
    the exact chain rule through ``exp0``, whose Jacobian at ``x`` is
    ``(a/n)(I - u u^T) + a' u u^T`` with ``n = ||x||``, ``u = x/n``,
    ``a = tanh(n/2)`` and ``a' = (1 - a^2)/2``.  Past the clamp radius
    ``a`` is constant, so ``a' = 0``.
    """
    n = np.linalg.norm(X, axis=-1, keepdims=True)
    half = n / 2.0
    a_raw = np.tanh(half)
    clamped = a_raw > 1.0 - eps
    a = np.where(clamped, 1.0 - eps, a_raw)
    # 1 - tanh^2 = sech^2 is exact where the difference would cancel
    gap = np.where(clamped, (1.0 - a) * (1.0 + a), 1.0 / np.cosh(half) ** 2)
    da = np.where(clamped, 0.0, gap / 2.0)

    tiny = n < 1e-4
    safe_n = np.where(tiny, 1.0, n)
    a_over_n = np.where(tiny, 0.5 - n**2 / 24.0, a / safe_n)
    u = np.where(tiny, 0.0, X / safe_n)
    Z = a_over_n * X

    diff = Z - P
    dist2 = np.sum(diff**2, axis=-1, keepdims=True)
    value = np.log(dist2) - (1.0 + phi) * np.log(gap)

    g_z = 2.0 * diff / dist2 + 2.0 * (1.0 + phi) * Z / gap
    radial = np.sum(u * g_z, axis=-1, keepdims=True)
    grad = a_over_n * g_z + (da - a_over_n) * radial * u
    return value[..., 0], grad


def loss_gradient(x, p, phi: float) -> LossGradient:
    """Loss of ``exp0(x)`` against prototype ``p`` and its gradient in ``x``."""
    _check_phi(phi)
    x = as_vector(x)
    p = ideal_point(p)
    if x.ndim != 1 or p.shape != x.shape:
        raise InvalidInputError(f"x and p must be vectors of equal length, got {x.shape}, {p.shape}")
    value, grad = _loss_and_grad(x[None, :], p[None, :], phi)
    return LossGradient(float(value[0]), grad[0])


def batch_loss(X, labels, protos, phi: float):
    """Mean penalized Busemann loss over a batch.

    Returns ``(mean_loss, grads)`` where ``grads[i]`` is the gradient of the
    i-th example's own loss with respect to ``X[i]`` (not divided by the
    batch size).  ``protos`` is a :class:`~busemann.prototypes.PrototypeSet`
    or a ``(C, d)`` array of unit vectors.
    """
    _check_phi(phi)
    X = as_vector(X, "X")
    if X.ndim == 1:
        X = X[None, :]
    P = np.asarray(getattr(protos, "points", protos), dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise InvalidInputError(f"expected {X.shape[0]} labels, got shape {labels.shape}")
    if P.ndim != 2 or P.shape[1] != X.shape[1]:
        raise InvalidInputError(
            f"prototype dimension {P.shape[-1]} does not match output dimension {X.shape[1]}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= P.shape[0]):
        raise InvalidInputError(f"labels must lie in [0, {P.shape[0]})")
    values, grads = _loss_and_grad(X, P[labels], phi)
    return float(np.mean(values)), grads


def _radial_integrand(r, exponent, d):
    return ((1.0 - r) * (1.0 + r)) ** exponent * r ** (d - 1)


def density_radial_integral(d: int, phi: float, delta: float, rtol: float = 1e-9) -> float:
    """Truncated radial factor ``int_0^{1-delta} (1-r^2)^(phi+1-d) r^(d-1) dr``.

    The interval is cut at ``1 - 10^k delta`` for ``k = 1, 2, ...`` so each
    piece sees the boundary singularity at a fixed relative scale.
    """
    if d < 2:
        raise InvalidInputError(f"d must be >= 2, got {d}")
    if not (0.0 < delta < 0.1):
        raise InvalidInputError(f"delta must lie in (0, 0.1), got {delta}")
    exponent = phi + 1.0 - d
    cuts = [1.0 - delta]
    step = delta * 10.0
    while step < 0.5:
        cuts.append(1.0 - step)
        step *= 10.0
    cuts.append(0.0)
    cuts.reverse()

    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    _radial_integrand, lo, hi, args=(exponent, d),
                    epsabs=0.0, epsrel=rtol, limit=200,
                )
            except integrate.IntegrationWarning as exc:
                raise NumericError(
                    f"quadrature failed on [{lo!r}, {hi!r}] for d={d}, phi={phi}, "
                    f"delta={delta}: {exc}"
                ) from exc
        total += val
    return total
