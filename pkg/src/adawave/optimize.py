"""Fixed-mesh minimization: projected limited-memory BFGS under box bounds.

Inner products are taken in a caller-supplied metric (the L2 mass matrix for
mesh problems), which keeps step sizes stable across mesh refinements.  Steps
follow a projected-backtracking Armijo rule; any change of the active bound
set invalidates the curvature pairs and resets the memory.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class OptimizeSettings:
    method: str = "lbfgs"            # or "gradient_descent"
    memory: int = 8
    grad_tol: float = 1e-5
    stagnation_window: int = 5
    stagnation_rel: float = 1e-3
    max_iters: int = 60
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 25

    def validate(self):
        if self.grad_tol <= 0:
            raise ConfigError("grad_tol must be positive")
        if self.memory < 1:
            raise ConfigError("L-BFGS memory must be at least 1")
        if self.method not in ("lbfgs", "gradient_descent"):
            raise ConfigError(f"unknown method '{self.method}'")
        if not (0 < self.armijo_c1 < 1) or not (0 < self.armijo_shrink < 1):
            raise ConfigError("invalid line-search parameters")


@dataclass
class IterationRecord:
    iteration: int
    value: float
    grad_norm: float
    step: float
    clamped: int


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def history_csv(self, path):
        with open(path, "w") as f:
            f.write("iter, E, grad_norm, step, clamped_nodes\n")
            for rec in self.history:
                f.write(f"{rec.iteration}, {rec.value!r}, {rec.grad_norm!r}, "
                        f"{rec.step!r}, {rec.clamped}\n")


def _two_loop(g, pairs, inner):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * inner(s, q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, rho = pairs[-1]
        q *= inner(s, y) / inner(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * inner(y, q)
        q += (a - b) * s
    return -q


def _backtrack(fun_grad, x, f, g, d, inner, lower, upper, settings):
    """Projected Armijo backtracking; None if no acceptable step exists.

    The slope is measured along the projected step, so a nonnegative value
    at the first trial means the whole projected arc is uphill and shrinking
    cannot help."""
    t = 1.0
    for k in range(settings.max_backtracks):
        x_new = np.clip(x + t * d, lower, upper)
        dx = x_new - x
        slope = inner(g, dx)
        if slope >= 0:
            if k == 0 and not (dx == 0).all():
                return None
            t *= settings.armijo_shrink
            continue
        f_new, g_new = fun_grad(x_new)
        if f_new <= f + settings.armijo_c1 * slope:
            return x_new, f_new, g_new, t
        t *= settings.armijo_shrink
    return None


def minimize_box(fun_grad, x0, inner, lower, upper, settings: OptimizeSettings) -> OptimizeResult:
    """Minimize fun_grad (returning value and gradient in the given metric)
    over the box [lower, upper], starting from x0."""
    settings.validate()
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f, g = fun_grad(x)
    pairs = deque(maxlen=settings.memory)
    history = []
    gnorms = []
    active = (x <= lower) | (x >= upper)
    reason, converged = "max_iters", False

    for it in range(settings.max_iters):
        gnorm = float(np.sqrt(max(inner(g, g), 0.0)))
        gnorms.append(gnorm)
        if gnorm <= settings.grad_tol:
            history.append(IterationRecord(it, f, gnorm, 0.0, int(active.sum())))
            reason, converged = "grad_tol", True
            break
        if len(gnorms) > settings.stagnation_window:
            window = gnorms[-(settings.stagnation_window + 1):]
            if (max(window) - min(window)) <= settings.stagnation_rel * max(window):
                history.append(IterationRecord(it, f, gnorm, 0.0, int(active.sum())))
                reason, converged = "stagnation", True
                break

        quasi_newton = settings.method == "lbfgs" and bool(pairs)
        if quasi_newton:
            d = _two_loop(g, pairs, inner)
            if inner(g, d) >= 0:        # not a descent direction, restart
                pairs.clear()
                quasi_newton = False
                d = -g
        else:
            d = -g

        found = _backtrack(fun_grad, x, f, g, d, inner, lower, upper, settings)
        if found is None and quasi_newton:
            # the projected quasi-Newton arc bent uphill; retry along the
            # projected gradient before giving up
            pairs.clear()
            found = _backtrack(fun_grad, x, f, g, -g, inner, lower, upper, settings)
        if found is None:
            history.append(IterationRecord(it, f, gnorm, 0.0, int(active.sum())))
            reason, converged = "line_search", False
            break
        x_new, f_new, g_new, t = found

        s = x_new - x
        y = g_new - g
        new_active = (x_new <= lower) | (x_new >= upper)
        if not np.array_equal(new_active, active):
            pairs.clear()
        else:
            sy = inner(s, y)
            if sy > 1e-12 * max(inner(s, s), 1e-300):
                pairs.append((s, y, 1.0 / sy))
        active = new_active
        history.append(IterationRecord(it, f_new, gnorm, t, int(active.sum())))
        x, f, g = x_new, f_new, g_new

    return OptimizeResult(x=x, value=f, grad=g, history=history,
                          converged=converged, reason=reason)


def minimize_on_mesh(c_init, objective, settings: OptimizeSettings) -> OptimizeResult:
    """Per-mesh inner loop of the adaptive procedure.

    `objective` is a TikhonovObjective; nodal iterates stay inside the
    coefficient box by projection.
    """
    mesh = objective.mesh
    M = mesh.mass_matrix()

    def inner(a, b):
        return float(a @ (M @ b))

    c0 = np.asarray(getattr(c_init, "values", c_init), dtype=float)
    return minimize_box(objective.value_and_gradient, c0, inner,
                        objective.bounds.lower, objective.bounds.upper, settings)
