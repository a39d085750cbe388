"""Objective oracles, resolvents and Tikhonov/minimum-norm machinery.

Every oracle is a smooth convex function on R^n exposing value, gradient,
resolvent (prox) and, when available, Hessian-vector products and known
minimizer data. Quadratic oracles carry an explicit ``(A, c, const)``
representation ``g(x) = 0.5 x^T A x + c^T x + const`` so that resolvent and
Tikhonov solves reduce to one symmetric linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DomainError",
    "SolverError",
    "UnknownSolutionSet",
    "ObjectiveOracle",
    "TikhonovKnobs",
    "evaluate",
    "prox",
    "tikhonov_minimizer",
    "min_norm_solution",
    "tikhonov_difference",
    "quadratic_oracle",
    "make_quadratic2d",
    "make_logbarrier2d",
    "make_l2reg_problem",
    "make_zero_problem",
    "make_problem",
    "gaussian_matrix",
    "power_iteration",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100


class DomainError(ValueError):
    """Raised when a point lies outside the open domain of an objective."""


class SolverError(RuntimeError):
    """Raised when an inner solver fails to converge.

    The last residual norm is kept in ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class UnknownSolutionSet(RuntimeError):
    """Raised when the minimum-norm solution cannot be determined."""


@dataclass(frozen=True)
class ObjectiveOracle:
    """A smooth convex objective on R^dimension.

    ``prox(rho, y)`` returns the x solving ``x + rho * gradient(x) = y``.
    ``feasible_box`` describes an open box ``x_i > feasible_box[i]``; it is
    None for objectives defined on the whole space.
    """

    name: str
    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    prox: Callable[[float, np.ndarray], np.ndarray]
    hessian_vec: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    lipschitz_grad: Optional[float] = None
    known_min_value: Optional[float] = None
    known_min_norm_solution: Optional[np.ndarray] = None
    feasible_box: Optional[np.ndarray] = None
    quadratic: Optional[tuple] = field(default=None, repr=False)
    # Exact gap g(x) - g*, avoids cancellation in value(x) - known_min_value.
    gap: Optional[Callable[[np.ndarray], float]] = field(default=None, repr=False)
    lipschitz_box: Optional[tuple] = None
    # (eigenvalues, eigenvectors, c in the eigenbasis) for quadratic oracles
    spectral: Optional[tuple] = field(default=None, repr=False)

    def in_domain(self, x):
        if self.feasible_box is None:
            return True
        return bool(np.all(np.asarray(x) > self.feasible_box))

    def check_domain(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(
                f"{self.name}: expected a point of shape ({self.dimension},), got {x.shape}"
            )
        if not self.in_domain(x):
            raise DomainError(f"{self.name}: point {x} outside open domain x > {self.feasible_box}")
        return x

    def hessian(self, x):
        """Dense Hessian assembled from Hessian-vector products."""
        if self.quadratic is not None:
            return self.quadratic[0]
        if self.hessian_vec is None:
            raise SolverError(f"{self.name}: no Hessian information for Newton solve")
        eye = np.eye(self.dimension)
        return np.column_stack([self.hessian_vec(x, e) for e in eye])

    def objective_gap(self, x):
        """g(x) - g*, using the exact form when the oracle provides one."""
        if self.gap is not None:
            return float(self.gap(x))
        if self.known_min_value is None:
            raise UnknownSolutionSet(f"{self.name}: optimal value unknown")
        return float(self.value(x) - self.known_min_value)


@dataclass(frozen=True)
class TikhonovKnobs:
    """Regularization weight and inner-solver controls for x_eps."""

    epsilon: float
    inner_tol: float = 1e-12
    inner_max_iter: int = NEWTON_MAX_ITER

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.inner_tol > 0:
            raise ValueError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.inner_max_iter < 1:
            raise ValueError("inner_max_iter must be at least 1")


def evaluate(oracle, x):
    """Return ``(g(x), grad g(x))``; raises DomainError outside the domain."""
    x = oracle.check_domain(x)
    return float(oracle.value(x)), np.asarray(oracle.gradient(x), dtype=float)


def prox(oracle, rho, y):
    """Resolvent of the gradient: the x with ``x + rho * grad g(x) = y``."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    y = np.asarray(y, dtype=float)
    if rho == 0:
        return y.copy()
    return oracle.prox(rho, y)


# ---------------------------------------------------------------------------
# Newton machinery for non-quadratic oracles


def _interior_start(oracle, y):
    if oracle.feasible_box is None:
        return y.copy()
    lower = oracle.feasible_box
    return np.where(y > lower, y, lower + 0.5)


def _damped_newton(oracle, x0, weight, shift, anchor, tol, max_iter, what, scale=1.0):
    """Minimize ``weight*g(x) + 0.5*shift*||x - anchor||^2`` by damped Newton.

    Stationarity reads ``weight*grad g(x) + shift*(x - anchor) = 0``. The
    Armijo backtracking rejects trial points outside the open domain.
    """
    n = oracle.dimension
    x = np.array(x0, dtype=float)

    def phi(z):
        return weight * oracle.value(z) + 0.5 * shift * float(np.dot(z - anchor, z - anchor))

    def residual(z):
        return weight * oracle.gradient(z) + shift * (z - anchor)

    r = residual(x)
    rn = np.linalg.norm(r)
    for _ in range(max_iter):
        if rn <= tol * scale:
            return x
        H = weight * oracle.hessian(x) + shift * np.eye(n)
        step = np.linalg.solve(H, -r)
        f0 = phi(x)
        slope = float(np.dot(r, step))
        t = 1.0
        while True:
            trial = x + t * step
            if oracle.in_domain(trial):
                # near the solution phi differences drown in roundoff, so a
                # residual decrease is accepted as well
                if (phi(trial) <= f0 + 1e-4 * t * slope
                        or np.linalg.norm(residual(trial)) <= (1 - 1e-4 * t) * rn):
                    break
            t *= 0.5
            if t < 1e-16:
                raise SolverError(f"{oracle.name}: {what} line search stalled", rn)
        x = trial
        r = residual(x)
        rn = np.linalg.norm(r)
    if rn <= tol * scale:
        return x
    raise SolverError(f"{oracle.name}: {what} did not converge in {max_iter} iterations", rn)


def tikhonov_minimizer(oracle, knobs):
    """Unique minimizer of ``g(x) + 0.5*epsilon*||x||^2``."""
    eps = knobs.epsilon
    if oracle.spectral is not None:
        evals, evecs, c_eig = oracle.spectral
        x = evecs @ (-c_eig / (evals + eps))
        A, c, _ = oracle.quadratic
        res = np.linalg.norm(A @ x + c + eps * x)
        if res > max(knobs.inner_tol, 1e3 * np.finfo(float).eps * (1 + np.linalg.norm(c))):
            raise SolverError(f"{oracle.name}: Tikhonov linear solve inaccurate", res)
        return x
    if oracle.known_min_norm_solution is not None:
        start = np.array(oracle.known_min_norm_solution, dtype=float)
    else:
        start = _interior_start(oracle, np.zeros(oracle.dimension))
    # weight 1 on g, shift eps toward the origin
    return _damped_newton(
        oracle, start, 1.0, eps, np.zeros(oracle.dimension),
        knobs.inner_tol, knobs.inner_max_iter, "Tikhonov solve",
    )


def tikhonov_difference(oracle, eps_from, eps_to, inner_tol=1e-12):
    """``x_{eps_to} - x_{eps_from}`` without cancellation for quadratics.

    In the eigenbasis the difference is
    ``c_i (eps_to - eps_from) / ((l_i + eps_from)(l_i + eps_to))``, which stays
    accurate when both points agree to many digits.
    """
    if oracle.spectral is not None:
        evals, evecs, c_eig = oracle.spectral
        coef = c_eig * (eps_to - eps_from) / ((evals + eps_from) * (evals + eps_to))
        return evecs @ coef
    a = tikhonov_minimizer(oracle, TikhonovKnobs(eps_from, inner_tol))
    b = tikhonov_minimizer(oracle, TikhonovKnobs(eps_to, inner_tol))
    return b - a


def min_norm_solution(oracle, tol=1e-7):
    """Minimum-norm minimizer, from analytic data or a vanishing-eps sweep."""
    if oracle.known_min_norm_solution is not None:
        return np.array(oracle.known_min_norm_solution, dtype=float)
    prev = None
    for eps in (1e-2, 1e-4, 1e-6, 1e-8):
        try:
            cur = tikhonov_minimizer(oracle, TikhonovKnobs(eps))
        except SolverError as exc:
            raise UnknownSolutionSet(f"{oracle.name}: Tikhonov sweep failed: {exc}") from exc
        if prev is not None and np.linalg.norm(cur - prev) < tol:
            return cur
        prev = cur
    raise UnknownSolutionSet(
        f"{oracle.name}: Tikhonov path did not settle; argmin may be empty or unbounded"
    )


# ---------------------------------------------------------------------------
# Concrete oracles


def power_iteration(M, tol=1e-12, max_iter=10_000, seed=0):
    """Largest eigenvalue of a symmetric positive semidefinite matrix."""
    M = np.asarray(M, dtype=float)
    v = np.random.default_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ M @ v)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam


def quadratic_oracle(name, A, c, const=0.0, min_norm=None, min_value=None, lipschitz=None):
    """Oracle for ``g(x) = 0.5 x^T A x + c^T x + const`` with A symmetric PSD."""
    A = np.array(A, dtype=float)
    c = np.array(c, dtype=float)
    n = c.shape[0]
    A.setflags(write=False)
    c.setflags(write=False)
    evals, evecs = np.linalg.eigh(A)
    evals = np.clip(evals, 0.0, None)
    c_eig = evecs.T @ c
    # argmin is nonempty only if c lies in range(A); null-space components of
    # c are rounding noise and would be amplified by 1/eps
    null = evals <= 1e-12 * max(float(evals[-1]) if n else 0.0, 1e-300)
    c_eig[null] = 0.0
    for arr in (evals, evecs, c_eig):
        arr.setflags(write=False)

    def value(x):
        return float(0.5 * x @ A @ x + c @ x + const)

    def gradient(x):
        return A @ x + c

    def resolvent(rho, y):
        # (I + rho A) x = y - rho c, solved in the eigenbasis of A
        rhs = evecs.T @ (y - rho * c)
        return evecs @ (rhs / (1.0 + rho * evals))

    if lipschitz is None:
        lipschitz = float(evals[-1]) if n else 0.0

    gap = None
    if min_norm is not None:
        xs = np.array(min_norm, dtype=float)
        xs.setflags(write=False)
        if min_value is None:
            min_value = value(xs)
        min_norm = xs

        def gap(x):
            d = x - xs
            return float(0.5 * d @ A @ d)

    return ObjectiveOracle(
        name=name,
        dimension=n,
        value=value,
        gradient=gradient,
        prox=resolvent,
        hessian_vec=lambda x, v: A @ v,
        lipschitz_grad=lipschitz,
        known_min_value=min_value,
        known_min_norm_solution=min_norm,
        quadratic=(A, c, float(const)),
        gap=gap,
        spectral=(evals, evecs, c_eig),
    )


def make_quadratic2d():
    """``g(x) = 5 (x1 + x2 - 1)^2``; argmin is a line, min-norm point (1/2, 1/2)."""
    A = 10.0 * np.ones((2, 2))
    c = np.array([-10.0, -10.0])
    return quadratic_oracle("quadratic2d", A, c, 5.0, min_norm=[0.5, 0.5], min_value=0.0,
                            lipschitz=20.0)


def make_zero_problem(dimension=1):
    """``g = 0``: every point is a minimizer, the origin is the min-norm one."""
    return quadratic_oracle("zero", np.zeros((dimension, dimension)), np.zeros(dimension),
                            min_norm=np.zeros(dimension), min_value=0.0, lipschitz=0.0)


_LB_LOWER = np.array([-1.0, -1.0])
_LB_LOWER.setflags(write=False)


def _lb_value(x):
    if np.any(x <= -1.0):
        raise DomainError(f"logbarrier2d: log argument nonpositive at {x}")
    return float(x[0] + x[1] ** 2 - 2.0 * np.log((x[0] + 1.0) * (x[1] + 1.0)))


def _lb_gradient(x):
    if np.any(x <= -1.0):
        raise DomainError(f"logbarrier2d: log argument nonpositive at {x}")
    return np.array([1.0 - 2.0 / (x[0] + 1.0), 2.0 * x[1] - 2.0 / (x[1] + 1.0)])


def _lb_hessian_diag(x):
    return np.array([2.0 / (x[0] + 1.0) ** 2, 2.0 + 2.0 / (x[1] + 1.0) ** 2])


def make_logbarrier2d(box=(-0.5, 10.0)):
    """``g(x) = x1 + x2^2 - 2 ln((x1 + 1)(x2 + 1))`` on the open set x_i > -1.

    The gradient is not globally Lipschitz; ``lipschitz_grad`` is the bound on
    the compact box ``[box[0], box[1]]^2``.
    """
    xstar = np.array([1.0, (np.sqrt(5.0) - 1.0) / 2.0])
    xstar.setflags(write=False)
    lo = box[0]
    # Hessian is diagonal and decreasing in each coordinate: worst corner is lo
    lip = float(max(2.0 / (lo + 1.0) ** 2, 2.0 + 2.0 / (lo + 1.0) ** 2))

    oracle = None

    def resolvent(rho, y):
        return _damped_newton(oracle, _interior_start(oracle, y), rho, 1.0, y,
                              NEWTON_TOL, NEWTON_MAX_ITER, "prox",
                              scale=1.0 + float(np.linalg.norm(y)))

    oracle = ObjectiveOracle(
        name="logbarrier2d",
        dimension=2,
        value=_lb_value,
        gradient=_lb_gradient,
        prox=resolvent,
        hessian_vec=lambda x, v: _lb_hessian_diag(x) * v,
        lipschitz_grad=lip,
        known_min_value=_lb_value(xstar),
        known_min_norm_solution=xstar,
        feasible_box=_LB_LOWER,
        lipschitz_box=tuple(box),
    )
    return oracle


def gaussian_matrix(seed, shape):
    """Standard normal draws: Philox4x64 uniforms through Box-Muller.

    Uniforms come from the counter-based ``numpy.random.Philox`` bit generator
    (53-bit doubles); consecutive uniform pairs ``(u1, u2)`` map to
    ``sqrt(-2 ln(1 - u1)) * (cos 2 pi u2, sin 2 pi u2)``. Values fill the
    requested shape in row-major order.
    """
    count = int(np.prod(shape))
    pairs = (count + 1) // 2
    u = np.random.Generator(np.random.Philox(seed)).random(2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(2.0 * np.pi * u2)
    z[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return z[:count].reshape(shape)


def make_l2reg_problem(seed, m, n):
    """``g(x) = 0.5 ||K x - b||^2 + ||x||^2`` with Gaussian K (m x n), b (m)."""
    if m < 1 or n < 1:
        raise ValueError(f"m and n must be positive, got m={m}, n={n}")
    draws = gaussian_matrix(seed, (m * n + m,))
    K = draws[: m * n].reshape(m, n)
    b = draws[m * n:]
    KtK = K.T @ K
    A = KtK + 2.0 * np.eye(n)
    c = -K.T @ b
    xstar = np.linalg.solve(A, K.T @ b)
    lip = power_iteration(KtK) + 2.0
    oracle = quadratic_oracle(f"l2reg(seed={seed},m={m},n={n})", A, c, 0.5 * float(b @ b),
                              min_norm=xstar, lipschitz=lip)
    return oracle, K, b


def make_problem(name, seed=42, m=40, n=50):
    """Look up an oracle by its configuration name."""
    if name == "quadratic2d":
        return make_quadratic2d()
    if name == "logbarrier2d":
        return make_logbarrier2d()
    if name == "l2reg":
        return make_l2reg_problem(seed, m, n)[0]
    if name == "zero":
        return make_zero_problem(2)
    raise KeyError(f"unknown problem {name!r}; expected quadratic2d, logbarrier2d or l2reg")
