"""Independent oracles the tests check the library against.

Everything here is deliberately written along a different computational
route than the library: plain Gaussian elimination instead of Cholesky,
Kronecker vectorization instead of eigendecomposition, trace-power Newton
identities instead of an eigensolver, stacked least squares instead of the
closed-form constrained minimizer, and finite differences instead of exact
gradients.
"""

from __future__ import annotations

import numpy as np


def gauss_solve(g, rhs):
    """Dense Gaussian elimination with partial pivoting."""
    a = np.array(g, dtype=np.float64)
    b = np.array(rhs, dtype=np.float64)
    n = a.shape[0]
    for col in range(n):
        pivot = col + np.argmax(np.abs(a[col:, col]))
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def charpoly_from_traces(h):
    """Characteristic polynomial coefficients via Newton's identities.

    Returns (c_0, ..., c_n) with det(xI - H) = sum_k c_k x^k, computed from
    the power sums p_k = tr(H^k) alone (no eigensolver involved).
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    powers = [np.trace(np.linalg.matrix_power(h, k)) for k in range(1, n + 1)]
    # e_k from Newton's identities: k e_k = sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i
    e = [1.0]
    for k in range(1, n + 1):
        acc = 0.0
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * powers[i - 1]
        e.append(acc / k)
    # det(xI - H) = sum_k (-1)^k e_k x^{n-k}
    coeffs = [(-1) ** k * e[k] for k in range(n + 1)]
    return np.array(coeffs[::-1])


def charpoly_from_roots(eigenvalues):
    """Expand prod (x - lam_i), lowest-degree coefficient first."""
    poly = np.array([1.0])
    for lam in eigenvalues:
        poly = np.convolve(poly, np.array([-lam, 1.0]))
    return poly


def kron_sylvester(h, c):
    """Solve H X + X H = C by vectorizing: (I (x) H + H^T (x) I) vec(X) = vec(C)."""
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    r = h.shape[0]
    lhs = np.kron(np.eye(r), h) + np.kron(h.T, np.eye(r))
    return np.linalg.solve(lhs, c.flatten(order="F")).reshape((r, r), order="F")


def _vec(m):
    return m.flatten(order="F")


def _unvec(v, shape):
    return v.reshape(shape, order="F")


class KKTOracle:
    """Stacked-system oracle for the constrained direction-matching problem.

    Variables z = [vec(J); vec(K)]. The objective is ||B J + K A + G||_F^2
    and the constraint is J A^T + A J^T - K^T B - B^T K = 0 (upper triangle
    rows). The minimizer set is characterized without normal equations
    (which would square the conditioning): a feasible z is optimal iff its
    image B J + K A equals the unconstrained least-squares image, because
    the constrained minimum cannot beat the unconstrained one. ``solve``
    returns the minimum-norm member; the set is ``z + null(stack)`` and
    has antisymmetric gauge freedom of dimension r (r - 1) / 2.
    """

    def __init__(self, a, b, g):
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.g = np.asarray(g, dtype=np.float64)
        r, n = self.a.shape
        m = self.b.shape[0]
        self.r, self.m, self.n = r, m, n
        self.n_j = r * n
        # vec(B J) = (I_n (x) B) vec(J);  vec(K A) = (A^T (x) I_m) vec(K)
        self.mat = np.hstack([np.kron(np.eye(n), self.b), np.kron(self.a.T, np.eye(m))])
        rows = []
        iu = np.triu_indices(r)
        for col in range(self.n_j + r * m):
            z = np.zeros(self.n_j + r * m)
            z[col] = 1.0
            j, k = self.split(z)
            cons = j @ self.a.T + self.a @ j.T - k.T @ self.b - self.b.T @ k
            rows.append(cons[iu])
        self.cons = np.array(rows).T
        z_ls, *_ = np.linalg.lstsq(self.mat, -_vec(self.g), rcond=None)
        self.optimal_image = self.mat @ z_ls
        self.stack = np.vstack([self.mat, self.cons])
        self.rhs = np.concatenate([self.optimal_image, np.zeros(self.cons.shape[0])])

    def split(self, z):
        j = _unvec(z[: self.n_j], (self.r, self.n))
        k = _unvec(z[self.n_j :], (self.m, self.r))
        return j, k

    def join(self, j, k):
        return np.concatenate([_vec(j), _vec(k)])

    def objective(self, z):
        return float(np.linalg.norm(self.mat @ z + _vec(self.g)) ** 2)

    def constraint_residual(self, z):
        return float(np.linalg.norm(self.cons @ z))

    def solve(self):
        """Minimum-norm member of the constrained minimizer set."""
        z, *_ = np.linalg.lstsq(self.stack, self.rhs, rcond=None)
        return z

    def distance_to_solution_set(self, z):
        """Distance from z to the affine set {stack @ z == rhs}."""
        residual = self.stack @ z - self.rhs
        correction, *_ = np.linalg.lstsq(self.stack, residual, rcond=None)
        return float(np.linalg.norm(correction))


def central_diff_directional(loss, w, direction, step):
    """Central finite difference of ``loss`` at ``w`` along ``direction``."""
    return (loss(w + step * direction) - loss(w - step * direction)) / (2.0 * step)


def gradient_probe_error(objective, w, rng, probes=20):
    """Max relative error of <grad, D> vs central differences over random D."""
    g = objective.grad(w)
    step = 1e-5 * (1.0 + np.linalg.norm(w))
    worst = 0.0
    for _ in range(probes):
        d = rng.standard_normal(w.shape)
        d /= np.linalg.norm(d)
        exact = float(np.sum(g * d))
        approx = central_diff_directional(objective.loss, w, d, step)
        denom = max(1.0, abs(exact))
        worst = max(worst, abs(exact - approx) / denom)
    return worst
