"""Ideal prototypes: fixed class directions on the boundary of the ball."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidInputError


class Provenance(str, Enum):
    UNIFORM_CIRCLE = "uniform-circle"
    SEPARATION = "separation"
    EXTERNAL_PROJECTED = "external-projected"


@dataclass(frozen=True)
class IdealPrototype:
    point: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """``C`` unit vectors in ``R^d``; row ``k`` is the prototype of class ``k``.

    The point matrix is copied and made read-only on construction.
    """

    points: np.ndarray
    provenance: Provenance = Provenance.EXTERNAL_PROJECTED
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 1:
            raise InvalidInputError(f"need a (C >= 2, d >= 1) array of prototypes, got {pts.shape}")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise InvalidInputError(f"prototype {bad} is not unit norm (norm {norms[bad]!r})")
        labels = np.arange(pts.shape[0]) if self.labels is None else np.asarray(self.labels)
        if sorted(labels.tolist()) != list(range(pts.shape[0])):
            raise InvalidInputError("prototype labels must be exactly 0..C-1")
        # store rows in label order so points[k] is class k
        order = np.argsort(labels, kind="stable")
        pts = pts[order]
        pts.setflags(write=False)
        labels = np.arange(pts.shape[0])
        labels.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def num_classes(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.num_classes

    def __iter__(self):
        for k in range(self.num_classes):
            yield IdealPrototype(self.points[k], k)


def _normalize_rows(P: np.ndarray) -> np.ndarray:
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def uniform_circle_prototypes(C: int) -> PrototypeSet:
    """``C`` equally spaced directions on the unit circle, starting at ``(1, 0)``."""
    if C < 2:
        raise InvalidInputError(f"need at least 2 classes, got {C}")
    angles = 2.0 * np.pi * np.arange(C) / C
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    # the trig values are within an ulp of the circle; renormalize to be safe
    return PrototypeSet(_normalize_rows(pts), Provenance.UNIFORM_CIRCLE)


def _max_cosine(P: np.ndarray) -> float:
    S = P @ P.T
    np.fill_diagonal(S, -np.inf)
    return float(S.max())


def separation_prototypes(
    C: int,
    d: int,
    iters: int = 1000,
    lr: float = 0.1,
    seed: int = 0,
    momentum: float = 0.9,
) -> PrototypeSet:
    """Spread ``C`` directions over the sphere in ``R^d`` by minimizing
    ``mean_i max_{j != i} p_i . p_j``.

    Subgradient descent with heavy-ball momentum and step ``lr / sqrt(1 + t)``;
    rows are projected back to the sphere after each step.  The iterate with
    the smallest maximum cosine is returned, so the result is never worse
    than the random start.
    """
    if C < 2:
        raise InvalidInputError(f"need at least 2 classes, got {C}")
    if d < 3:
        raise InvalidInputError(f"separation placement needs d >= 3, got {d}")
    if iters < 0 or not lr > 0 or not 0 <= momentum < 1:
        raise InvalidInputError(f"bad hyperparameters iters={iters}, lr={lr}, momentum={momentum}")

    rng = np.random.default_rng(seed)
    P = _normalize_rows(rng.standard_normal((C, d)))
    best, best_val = P.copy(), _max_cosine(P)
    velocity = np.zeros_like(P)
    rows = np.arange(C)
    for t in range(iters):
        S = P @ P.T
        np.fill_diagonal(S, -np.inf)
        nearest = np.argmax(S, axis=1)  # first index wins on ties
        grad = P[nearest] / C
        np.add.at(grad, nearest, P[rows] / C)
        velocity = momentum * velocity + grad
        P = _normalize_rows(P - lr / np.sqrt(1.0 + t) * velocity)
        val = _max_cosine(P)
        if val < best_val:
            best, best_val = P.copy(), val
    return PrototypeSet(best, Provenance.SEPARATION)


def project_to_boundary(points, labels=None) -> PrototypeSet:
    """l2-normalize externally supplied prototypes (e.g. from a hierarchy embedding)."""
    P = np.array(points, dtype=np.float64)
    if P.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array of prototypes, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise InvalidInputError("prototype coordinates must be finite")
    norms = np.linalg.norm(P, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InvalidInputError(f"row {int(zero[0])} has zero norm and cannot be projected")
    return PrototypeSet(P / norms[:, None], Provenance.EXTERNAL_PROJECTED, labels)


def separation_metrics(protos: PrototypeSet) -> tuple[float, float]:
    """Return ``(min_angle, max_cosine)`` over distinct prototype pairs."""
    max_cos = _max_cosine(protos.points)
    return float(np.arccos(np.clip(max_cos, -1.0, 1.0))), max_cos
