"""Benchmark objectives with exact gradients, and adapter initializers.

Instances are generated from 64-bit seeds through numpy's PCG64 generator
(``np.random.default_rng``), so every problem is reproducible from its
dimensions and seed alone.

The sensing operator is constructed with a globally bounded spectrum: all
singular values lie in [sqrt(1-delta), sqrt(1+delta)] with the endpoints
attained, so ``(1-delta)||W||_F^2 <= ||W S||_F^2 <= (1+delta)||W||_F^2``
holds for every W (not just low-rank ones, and not just with high
probability) and the restricted-isometry constant is exactly delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LoRAFactors, Objective
from .linalg import as_matrix, thin_svd

__all__ = [
    "InvalidDelta",
    "SensingProblem",
    "RegressionProblem",
    "SensingObjective",
    "QuadraticObjective",
    "RegressionObjective",
    "make_rip_sensing",
    "make_sensing_instance",
    "sensing_objective",
    "quadratic_objective",
    "regression_objective",
    "balanced_init",
    "zero_b_init",
    "make_regression_instance",
    "perturbed_balanced_init",
]


class InvalidDelta(Exception):
    """The restricted-isometry constant must lie in [0, 1)."""


@dataclass(frozen=True)
class SensingProblem:
    """Noiseless low-rank sensing instance: Y = (W_pt + B* A*) S exactly."""

    s: np.ndarray        # n x o sensing matrix
    y: np.ndarray        # m x o observations
    w_pt: np.ndarray     # m x n frozen base weight
    a_star: np.ndarray   # r x n ground-truth factor
    b_star: np.ndarray   # m x r ground-truth factor
    delta: float

    @property
    def rank(self) -> int:
        return self.a_star.shape[0]


@dataclass(frozen=True)
class RegressionProblem:
    """Single feature-label pair with unit feature and unit residual."""

    s: np.ndarray        # n-vector, ||s|| = 1
    y: np.ndarray        # m-vector
    w_pt: np.ndarray     # m x n


def _seeded_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish orthogonal matrix: QR of a Gaussian with R's diagonal forced
    positive, so the result is a deterministic function of the draw."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def make_rip_sensing(n: int, o: int, delta: float, seed) -> np.ndarray:
    """Sensing matrix with every singular value in [sqrt(1-d), sqrt(1+d)].

    The smallest and largest draws are pinned to the interval endpoints, so
    the norm bounds are tight and the isometry constant equals delta for
    every rank. Square (o = n) gives two-sided certification; for o < n the
    lower bound is void on the left null space.
    """
    if not 0.0 <= delta < 1.0:
        raise InvalidDelta(f"delta must be in [0, 1), got {delta}")
    if o > n:
        raise ValueError(f"o = {o} > n = {n} is not supported")
    rng = np.random.default_rng(seed)
    u = _seeded_orthogonal(n, rng)
    v = _seeded_orthogonal(o, rng)
    k = min(n, o)
    lo, hi = np.sqrt(1.0 - delta), np.sqrt(1.0 + delta)
    sigma = rng.uniform(lo, hi, size=k)
    sigma[np.argmin(sigma)] = lo
    sigma[np.argmax(sigma)] = hi
    return (u[:, :k] * sigma) @ v[:, :k].T


def make_sensing_instance(
    m: int, n: int, o: int, r: int, delta: float, seed
) -> SensingProblem:
    """Seeded sensing instance with balanced ground-truth factors.

    The ground-truth factors are the balanced factorization of a random
    rank-r product rescaled so smin(A*) = smin(B*) = 1, which makes the
    initialization certificate directly interpretable.
    """
    rng = np.random.default_rng(seed)
    s = make_rip_sensing(n, o, delta, rng)
    w_pt = rng.standard_normal((m, n)) / np.sqrt(n)
    target = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    sigma_r = np.linalg.svd(target, compute_uv=False)[r - 1]
    star = balanced_init(target / sigma_r, r)
    y = (w_pt + star.b @ star.a) @ s
    return SensingProblem(s=s, y=y, w_pt=w_pt, a_star=star.a, b_star=star.b, delta=delta)


class SensingObjective(Objective):
    """0.5 ||W S - Y||_F^2 with gradient (W S - Y) S^T."""

    def __init__(self, problem: SensingProblem):
        self.problem = problem
        self.optimum_loss = 0.0
        self.optimum_w = problem.w_pt + problem.b_star @ problem.a_star

    def loss(self, w: np.ndarray) -> float:
        resid = w @ self.problem.s - self.problem.y
        return 0.5 * float(np.sum(resid * resid))

    def grad(self, w: np.ndarray) -> np.ndarray:
        return (w @ self.problem.s - self.problem.y) @ self.problem.s.T


class QuadraticObjective(Objective):
    """(mu/2) ||W - W*||_F^2, the canonical strongly convex test objective."""

    def __init__(self, w_star: np.ndarray, mu: float):
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.w_star = as_matrix(w_star, "W_star")
        self.mu = float(mu)
        self.optimum_loss = 0.0
        self.optimum_w = self.w_star

    def loss(self, w: np.ndarray) -> float:
        diff = w - self.w_star
        return 0.5 * self.mu * float(np.sum(diff * diff))

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.mu * (w - self.w_star)


class RegressionObjective(Objective):
    """||W s - y||^2 with rank-one gradient 2 (W s - y) s^T."""

    def __init__(self, problem: RegressionProblem):
        self.problem = problem

    def loss(self, w: np.ndarray) -> float:
        resid = w @ self.problem.s - self.problem.y
        return float(resid @ resid)

    def grad(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * np.outer(w @ self.problem.s - self.problem.y, self.problem.s)


def sensing_objective(problem: SensingProblem) -> SensingObjective:
    return SensingObjective(problem)


def quadratic_objective(w_star, mu: float) -> QuadraticObjective:
    return QuadraticObjective(w_star, mu)


def regression_objective(problem: RegressionProblem) -> RegressionObjective:
    return RegressionObjective(problem)


def balanced_init(w_delta, r: int) -> LoRAFactors:
    """Balanced factorization of the best rank-r approximation of w_delta.

    Splits the truncated SVD as A = S^{1/2} V^T, B = U S^{1/2}, which puts
    the pair exactly on the balanced manifold (A A^T = B^T B = S). Singular
    values below 1e-12 of the largest are clamped to that threshold so the
    factor Grams stay invertible.
    """
    w_delta = as_matrix(w_delta, "w_delta")
    u, sigma, v = thin_svd(w_delta, r)
    sigma = np.maximum(sigma, 1e-12 * sigma[0])
    root = np.sqrt(sigma)
    return LoRAFactors(a=root[:, None] * v.T, b=u * root)


def zero_b_init(n: int, m: int, r: int, seed, align=None) -> LoRAFactors:
    """Unit-row random A with B = 0.

    Without ``align``, each row of A is an independent Gaussian direction
    normalized to unit norm. With ``align`` (an n-vector), every row keeps
    an exact 0.5 component along it, so ||A align|| stays of order sqrt(r)
    independent of n; a generic unit row's overlap with a fixed direction
    decays like n^{-1/2}, which would starve the signal at large n.
    """
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((r, n))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    if align is not None:
        direction = np.asarray(align, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        coeff = 0.5
        ortho = rows - np.outer(rows @ direction, direction)
        norms = np.linalg.norm(ortho, axis=1, keepdims=True)
        if norms.min() < 1e-12:
            raise ValueError("a sampled row is parallel to align; use another seed")
        rows = coeff * direction[None, :] + np.sqrt(1.0 - coeff**2) * (ortho / norms)
    return LoRAFactors(a=rows, b=np.zeros((m, r)))


def make_regression_instance(n: int, m: int, seed) -> RegressionProblem:
    """Unit feature s, Gaussian base weight with N(0, 1/n) entries, and a
    label placed so the initial residual ||W_pt s - y|| is exactly 1."""
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(n)
    s /= np.linalg.norm(s)
    w_pt = rng.standard_normal((m, n)) / np.sqrt(n)
    u = rng.standard_normal(m)
    u /= np.linalg.norm(u)
    return RegressionProblem(s=s, y=w_pt @ s + u, w_pt=w_pt)


def perturbed_balanced_init(
    problem: SensingProblem, scale: float, perturbation: float, seed
) -> LoRAFactors:
    """Start factors for sensing runs: balance scale * B* A* plus a relative
    Gaussian perturbation. Small scales and perturbations keep the
    initialization certificate below 1."""
    rng = np.random.default_rng(seed)
    target = problem.b_star @ problem.a_star
    noise = rng.standard_normal(target.shape)
    noise *= np.linalg.norm(target) / np.linalg.norm(noise)
    return balanced_init(scale * target + perturbation * noise, problem.rank)
