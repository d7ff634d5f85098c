"""Finite-dimensional harness for the abstract regularization results.

Small synthetic operators (linear with controlled spectrum, plus a mildly
nonlinear perturbation) make the hypotheses of the convergence-rate,
strong-convexity and subspace-relaxation statements checkable numerically,
independent of the PDE stack.

Relaxation distances are reported in two norms.  In the energy norm of the
quadratic functional the non-increase of nested Galerkin minimizers is a
theorem (Cea's lemma); in the ambient Euclidean norm it can fail for skewed
spectra, so that sequence is reported rather than asserted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError


@dataclass
class SmoothOperator:
    """Operator with an explicitly supplied Jacobian."""

    dim_in: int
    dim_out: int
    eval: callable
    jacobian: callable
    lipschitz_n1: float | None = None   # measured sup |F'| on a probe ball
    lipschitz_n2: float | None = None   # measured Lipschitz constant of F'

    def check_jacobian(self, rng, n_points=5, h=1e-6, rtol=1e-6):
        """Finite-difference consistency of the Jacobian at random points."""
        for _ in range(n_points):
            x = rng.standard_normal(self.dim_in)
            J = self.jacobian(x)
            for j in range(self.dim_in):
                e = np.zeros(self.dim_in)
                e[j] = h
                fd = (self.eval(x + e) - self.eval(x - e)) / (2 * h)
                if not np.allclose(J[:, j], fd, rtol=rtol, atol=1e-8):
                    return False
        return True

    def measure_bounds(self, center, radius, rng, samples=50):
        """Estimate of the derivative bound and Lipschitz constant on a ball."""
        pts = [center + radius * _ball_point(rng, self.dim_in) for _ in range(samples)]
        n1 = max(np.linalg.norm(self.jacobian(p), 2) for p in pts)
        n2 = 0.0
        for i in range(0, samples - 1, 2):
            dx = np.linalg.norm(pts[i] - pts[i + 1])
            if dx > 0:
                dj = np.linalg.norm(self.jacobian(pts[i]) - self.jacobian(pts[i + 1]), 2)
                n2 = max(n2, dj / dx)
        self.lipschitz_n1, self.lipschitz_n2 = float(n1), float(n2)
        return self.lipschitz_n1, self.lipschitz_n2


def _ball_point(rng, dim):
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    return u * rng.uniform() ** (1.0 / dim)


def linear_operator(A) -> SmoothOperator:
    A = np.asarray(A, dtype=float)
    return SmoothOperator(dim_in=A.shape[1], dim_out=A.shape[0],
                          eval=lambda x: A @ x, jacobian=lambda x: A)


def mildly_nonlinear_operator(A, eps) -> SmoothOperator:
    """F(x) = A x + eps * x^2 (componentwise); smooth with F' Lipschitz."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    return SmoothOperator(
        dim_in=n, dim_out=A.shape[0],
        eval=lambda x: A @ x + eps * x * x,
        jacobian=lambda x: A + 2.0 * eps * np.diag(x))


def constant_operator(dim, value=None) -> SmoothOperator:
    """F identically constant: the Tikhonov functional is the pure regularizer."""
    v = np.zeros(dim) if value is None else np.asarray(value, dtype=float)
    return SmoothOperator(dim_in=dim, dim_out=len(v),
                          eval=lambda x: v.copy(),
                          jacobian=lambda x: np.zeros((len(v), dim)))


def random_linear_instance(rng, dim=20, smin=0.7, smax=1.5):
    """Random map with singular values log-uniform in [smin, smax]."""
    U, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    V, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    s = np.exp(rng.uniform(np.log(smin), np.log(smax), dim))
    return U @ np.diag(s) @ V.T


@dataclass
class SubspaceChain:
    """Nested orthogonal projections P_1, ..., P_N."""

    projectors: list

    def __post_init__(self):
        for i, P in enumerate(self.projectors):
            P = np.asarray(P, dtype=float)
            if not np.allclose(P, P.T, atol=1e-10):
                raise ConfigError(f"projector {i} is not symmetric")
            if not np.allclose(P @ P, P, atol=1e-10):
                raise ConfigError(f"projector {i} is not idempotent")
        for i in range(len(self.projectors) - 1):
            Pn, Pn1 = self.projectors[i], self.projectors[i + 1]
            if not np.allclose(Pn1 @ Pn, Pn, atol=1e-10):
                raise ConfigError(f"projector {i + 1} does not contain projector {i}")

    @classmethod
    def random_nested(cls, rng, dim, dims):
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return cls([Q[:, :k] @ Q[:, :k].T for k in dims])


def _basis_of(projector):
    w, V = np.linalg.eigh(np.asarray(projector, dtype=float))
    return V[:, w > 0.5]


def tikhonov_value_grad(op, y, x0, alpha, x):
    r = op.eval(x) - y
    J = op.jacobian(x)
    val = 0.5 * float(r @ r) + 0.5 * alpha * float((x - x0) @ (x - x0))
    grad = J.T @ r + alpha * (x - x0)
    return val, grad, r, J


def minimize_tikhonov_fd(op: SmoothOperator, y, x0, alpha, subspace=None,
                         tol=1e-12, max_iters=200):
    """Damped Gauss-Newton minimizer of the finite-dimensional Tikhonov
    functional, optionally restricted to the range of a projector."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    Q = None if subspace is None else _basis_of(subspace)
    if Q is not None and Q.shape[1] == 0:
        raise ConfigError("subspace projector has empty range")

    def lift(z):
        return z if Q is None else Q @ z

    z = x0.copy() if Q is None else Q.T @ x0
    scale = max(1.0, alpha)      # keeps the threshold meaningful when the
    for _ in range(max_iters):   # regularization term dominates in magnitude
        x = lift(z)
        val, grad, r, J = tikhonov_value_grad(op, y, x0, alpha, x)
        g = grad if Q is None else Q.T @ grad
        if np.linalg.norm(g) <= tol * scale:
            return x
        Jr = J if Q is None else J @ Q
        H = Jr.T @ Jr + alpha * np.eye(len(z))
        dz = np.linalg.solve(H, -g)
        t = 1.0
        for _ in range(60):
            z_new = z + t * dz
            v_new = tikhonov_value_grad(op, y, x0, alpha, lift(z_new))[0]
            if v_new <= val + 1e-4 * t * float(g @ dz):
                break
            t *= 0.5
        else:
            raise NumericalError("Gauss-Newton line search failed")
        z = z + t * dz
    x = lift(z)
    _, grad, _, _ = tikhonov_value_grad(op, y, x0, alpha, x)
    g = grad if Q is None else Q.T @ grad
    if np.linalg.norm(g) > max(tol, 1e-9) * scale:
        raise NumericalError("Gauss-Newton did not reach the gradient tolerance")
    return x


def closed_form_linear(A, y, x0, alpha):
    """(A^T A + alpha I)^{-1} (A^T y + alpha x0), the linear Tikhonov solution."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    return np.linalg.solve(A.T @ A + alpha * np.eye(n),
                           A.T @ np.asarray(y) + alpha * np.asarray(x0))


def check_strong_convexity(op, y, x0, alpha, center, radius, samples, rng):
    """Monotone-gradient ratio <J'(x)-J'(z), x-z> / |x-z|^2 over random pairs
    in a ball; passing means exceeding half of alpha (twice the alpha/4
    convexity constant)."""
    center = np.asarray(center, dtype=float)
    ratios = []
    for _ in range(samples):
        x = center + radius * _ball_point(rng, op.dim_in)
        z = center + radius * _ball_point(rng, op.dim_in)
        d = x - z
        nd2 = float(d @ d)
        if nd2 < 1e-24:
            continue
        gx = tikhonov_value_grad(op, y, x0, alpha, x)[1]
        gz = tikhonov_value_grad(op, y, x0, alpha, z)[1]
        ratios.append(float((gx - gz) @ d) / nd2)
    ratios = np.array(ratios)
    return {"min_ratio": float(ratios.min()),
            "pass_fraction": float(np.mean(ratios >= 0.5 * alpha)),
            "threshold": 0.5 * alpha,
            "samples": len(ratios)}


@dataclass
class RelaxationResult:
    distances: list              # energy-norm distances to the full minimizer
    eta: list
    distances_ambient: list
    bound_ok_fraction: float     # a posteriori bound >= actual distance
    converged_at: int | None


def relaxation_experiment(op, y, x0, alpha, chain: SubspaceChain) -> RelaxationResult:
    """Minimize on each nested subspace and compare against the full-space
    minimizer.  Energy-norm distances realize the provable Galerkin
    non-increase for quadratics; ambient distances are informational."""
    x_full = minimize_tikhonov_fd(op, y, x0, alpha)
    J_full = op.jacobian(x_full)
    H = J_full.T @ J_full + alpha * np.eye(op.dim_in)

    def energy(v):
        return float(np.sqrt(max(v @ (H @ v), 0.0)))

    distances, dist_amb, eta = [], [], []
    bound_ok = 0
    converged_at = None
    for i, P in enumerate(chain.projectors):
        xn = minimize_tikhonov_fd(op, y, x0, alpha, subspace=P)
        e = xn - x_full
        distances.append(energy(e))
        dist_amb.append(float(np.linalg.norm(e)))
        grad_full = tikhonov_value_grad(op, y, x0, alpha, xn)[1]
        bound = (2.0 / alpha) * float(np.linalg.norm(grad_full))
        if bound >= dist_amb[-1] - 1e-12:
            bound_ok += 1
        if distances[-1] <= 1e-10 and converged_at is None:
            converged_at = i + 1
    for i in range(len(distances) - 1):
        if distances[i] <= 1e-14:
            break
        eta.append(distances[i + 1] / distances[i])
    return RelaxationResult(distances=distances, eta=eta,
                            distances_ambient=dist_amb,
                            bound_ok_fraction=bound_ok / len(chain.projectors),
                            converged_at=converged_at)


def convergence_rate_experiment(op, x_star, x0, mu, delta_grid, rng):
    """Reconstruction error against the noise level with alpha = delta^(2 mu).

    One random unit noise direction is drawn per experiment and scaled by
    each delta, so the error trend across the grid is not confounded by
    direction resampling.
    """
    x_star = np.asarray(x_star, dtype=float)
    y_star = op.eval(x_star)
    direction = rng.standard_normal(op.dim_out)
    direction /= np.linalg.norm(direction)
    rows = []
    for delta in delta_grid:
        alpha = float(delta) ** (2.0 * mu)
        y = y_star + delta * direction
        x_alpha = minimize_tikhonov_fd(op, y, x0, alpha)
        rows.append({"delta": float(delta), "alpha": alpha,
                     "error": float(np.linalg.norm(x_alpha - x_star)),
                     "noise_bound": 2.0 * float(delta) ** mu})
    return rows


def fit_loglog_slope(deltas, errors):
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(deltas[keep]), np.log(errors[keep]), 1)[0])
