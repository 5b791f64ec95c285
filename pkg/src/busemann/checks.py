"""Numerical verification suites run by ``busemann check``.

Each suite returns a JSON-ready dict with a ``passed`` flag, the worst
deviation it saw, and the inputs of any failing case.
"""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .geometry import busemann, busemann_limit
from .loss import batch_loss, density_radial_integral, loss_gradient, penalized_busemann_loss
from .model import backward, forward, init_model, logreg_equivalence_check, predict_by_loss, predict_embeddings
from .geometry import exp0

SUITES = ("gradient", "busemann-limit", "logreg", "density", "inference-equiv")

GradientFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

FD_STEP = 1e-6
LOSS_GRAD_RTOL = 1e-6
MLP_GRAD_RTOL = 1e-5
LIMIT_TOL = 1e-6
LOGREG_TOL = 1e-10


def _unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _rel_err(a, b) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else 0.0


def central_difference(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def alternative_gradient_expression(x, p) -> np.ndarray:
    """A competing closed form for the input gradient, with its trailing
    scalar term taken along ``x/||x||``.  Only used to report how far it
    departs from the chain-rule gradient."""
    x = np.asarray(x, dtype=np.float64)
    n = np.linalg.norm(x)
    t = np.tanh(n)
    px = float(p @ x)
    den = n - t * px
    return ((x - p) * t / den + np.ones_like(x) * px * (t / n - 1.0) / den
            + np.tanh(n / 2.0) * x / n)


def sample_pre_activation(rng, d: int, r_lo: float = 0.05, r_hi: float = 0.95) -> np.ndarray:
    """Random ``x`` whose image under exp0 has norm uniform in ``[r_lo, r_hi]``."""
    r = rng.uniform(r_lo, r_hi)
    return 2.0 * np.arctanh(r) * _unit(rng, d)


def check_gradient(seed: int = 0, trials: int = 100, mlp_trials: int = 20,
                   gradient_fn: GradientFn | None = None) -> dict:
    if gradient_fn is None:
        def gradient_fn(x, p, phi):
            return loss_gradient(x, p, phi).grad
    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0
    alt_dev = 0.0
    for k in range(trials):
        d = int(rng.integers(1, 11))
        x = sample_pre_activation(rng, d)
        p = _unit(rng, d)
        phi = float(rng.uniform(0.0, 5.0))
        g = gradient_fn(x, p, phi)
        fd = central_difference(lambda v: penalized_busemann_loss(exp0(v), p, phi), x)
        err = _rel_err(g, fd)
        worst = max(worst, err)
        if not err < LOSS_GRAD_RTOL:
            failures.append({"trial": k, "x": x.tolist(), "p": p.tolist(), "phi": phi, "rel_err": err})
        alt_dev = max(alt_dev, _rel_err(alternative_gradient_expression(x, p),
                                        loss_gradient(x, p, 0.0).grad))

    mlp_worst = 0.0
    for k in range(mlp_trials):
        m = init_model(8, 4, (16,), seed=seed * 1000 + k)
        X = rng.standard_normal((6, 8))
        P = np.stack([_unit(rng, 4) for _ in range(3)])
        y = rng.integers(0, 3, 6)
        phi = float(rng.uniform(0.0, 3.0))
        _, g_out = batch_loss(forward(m, X), y, P, phi)
        analytic = np.concatenate([g.ravel() for g in backward(m, X, g_out / len(X))])
        params = m.params()
        flat = np.concatenate([q.ravel() for q in params])

        def total(theta):
            off = 0
            for q in params:
                q[...] = theta[off:off + q.size].reshape(q.shape)
                off += q.size
            return batch_loss(forward(m, X), y, P, phi)[0]

        fd = central_difference(total, flat)
        total(flat)
        err = _rel_err(analytic, fd)
        mlp_worst = max(mlp_worst, err)
        if not err < MLP_GRAD_RTOL:
            failures.append({"mlp_trial": k, "phi": phi, "rel_err": err})

    return {"passed": not failures, "trials": trials, "mlp_trials": mlp_trials,
            "max_rel_err_loss": worst, "max_rel_err_mlp": mlp_worst,
            "tolerance_loss": LOSS_GRAD_RTOL, "tolerance_mlp": MLP_GRAD_RTOL,
            "alternative_expression_max_rel_dev": alt_dev, "failures": failures[:10]}


def check_busemann_limit(seed: int = 0, trials: int = 100) -> dict:
    rng = np.random.default_rng(seed)
    failures = []
    worst20 = 0.0
    for k in range(trials):
        d = int(rng.integers(2, 11))
        p = _unit(rng, d)
        z = rng.uniform(0.0, 0.9) * _unit(rng, d)
        exact = busemann(p, z)
        e10 = abs(busemann_limit(p, z, 10.0) - exact)
        e20 = abs(busemann_limit(p, z, 20.0) - exact)
        worst20 = max(worst20, e20)
        if not (e20 < LIMIT_TOL and e20 < e10):
            failures.append({"trial": k, "p": p.tolist(), "z": z.tolist(), "err_t10": e10, "err_t20": e20})
    return {"passed": not failures, "trials": trials, "max_err_t20": worst20,
            "tolerance": LIMIT_TOL, "failures": failures[:10]}


def check_logreg(seed: int = 0, samples: int = 1000) -> dict:
    rep = logreg_equivalence_check(samples, seed)
    rep["tolerance"] = LOGREG_TOL
    rep["passed"] = rep["max_abs_deviation"] < LOGREG_TOL
    return rep


def classify_growth(i4: float, i6: float, i8: float) -> str:
    """Label the tail behaviour from truncations at delta = 1e-4, 1e-6, 1e-8.

    Successive increments shrink geometrically for a convergent integral,
    stay roughly constant under logarithmic growth, and grow for a power-law
    divergence.
    """
    q = (i8 - i6) / (i6 - i4)
    if q < 0.5:
        return "convergent"
    if q <= 2.0:
        return "logarithmic"
    return "divergent"


def density_table(dims=(4, 5, 6), offsets=(-0.5, 0.0, 0.5)) -> list[dict]:
    rows = []
    for d in dims:
        for off in offsets:
            phi = d - 2 + off
            i4, i6, i8 = (density_radial_integral(d, phi, delta) for delta in (1e-4, 1e-6, 1e-8))
            rows.append({"d": d, "phi": phi, "I_1e-4": i4, "I_1e-6": i6, "I_1e-8": i8,
                         "rel_change_1e-6_1e-8": abs(i6 - i8) / i8, "ratio_1e-8_1e-4": i8 / i4,
                         "behaviour": classify_growth(i4, i6, i8)})
    return rows


def check_density(seed: int = 0) -> dict:
    rows = density_table()
    failures = []
    for row in rows:
        gap = row["phi"] - (row["d"] - 2)
        expected = "convergent" if gap > 0 else ("logarithmic" if gap == 0 else "divergent")
        row["expected"] = expected
        if row["behaviour"] != expected:
            failures.append(row)
    return {"passed": not failures, "table": rows, "failures": failures}


def check_inference_equivalence(seed: int = 0, samples: int = 1000,
                                configs=((2, 10), (5, 10), (10, 100))) -> dict:
    rng = np.random.default_rng(seed)
    results = []
    failures = []
    for d, C in configs:
        P = np.stack([_unit(rng, d) for _ in range(C)])
        Z = np.stack([rng.uniform(0.01, 0.99) * _unit(rng, d) for _ in range(samples)])
        phi = 0.1 * d
        by_cos, _, _ = predict_embeddings(Z, P)
        by_loss = predict_by_loss(Z, P, phi)
        bad = np.flatnonzero(by_cos != by_loss)
        results.append({"d": d, "C": C, "samples": samples, "mismatches": int(bad.size)})
        for i in bad[:5]:
            failures.append({"d": d, "C": C, "z": Z[i].tolist(),
                             "cosine_label": int(by_cos[i]), "loss_label": int(by_loss[i])})
    return {"passed": not failures, "configs": results, "failures": failures}


def run_checks(suite: str = "all", seed: int = 0, gradient_fn: GradientFn | None = None) -> dict:
    names = SUITES if suite == "all" else (suite,)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suite(s) {sorted(unknown)}")
    runners = {
        "gradient": lambda: check_gradient(seed, gradient_fn=gradient_fn),
        "busemann-limit": lambda: check_busemann_limit(seed),
        "logreg": lambda: check_logreg(seed),
        "density": lambda: check_density(seed),
        "inference-equiv": lambda: check_inference_equivalence(seed),
    }
    report = {"seed": seed, "suites": {}}
    for name in names:
        t0 = time.perf_counter()
        res = runners[name]()
        res["seconds"] = round(time.perf_counter() - t0, 3)
        report["suites"][name] = res
    report["passed"] = all(r["passed"] for r in report["suites"].values())
    return report
