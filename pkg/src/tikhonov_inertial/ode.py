"""Inertial flow with vanishing damping, Hessian damping, time scaling and
Tikhonov regularization, integrated in Hessian-free first-order form.

The second-order system

    x'' + (alpha / t^q) x' + beta Hess g(x) x' + delta(t) grad g(x) + (a / t^p) x = 0

is rewritten with ``y = x' + beta grad g(x)`` as

    x' = y - beta grad g(x)
    y' = -(alpha / t^q) y - (delta(t) - beta alpha / t^q) grad g(x) - (a / t^p) x

which needs one gradient and no Hessian per right-hand-side evaluation.
Setting ``beta = 0, delta = 1`` gives the plain vanishing-damping Tikhonov
flow; ``q = p = 0`` gives constant damping and constant regularization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .problems import UnknownSolutionSet, min_norm_solution

__all__ = [
    "StiffnessError",
    "FlowParams",
    "PhaseState",
    "Trajectory",
    "phase_rhs",
    "integrate",
    "lipschitz_envelope",
    "special_case",
    "TRAJECTORY_COLUMNS",
    "format_float",
]


class StiffnessError(RuntimeError):
    """Step size fell below the underflow threshold."""

    def __init__(self, t, h):
        super().__init__(f"step size underflow at t={t!r}: h={h!r} < 1e-14*t")
        self.t = t
        self.h = h


@dataclass(frozen=True)
class FlowParams:
    """Parameters of the continuous flow; ``delta(t) = delta_c * t**delta_theta``."""

    alpha: float
    beta: float = 0.0
    a: float = 0.0
    p: float = 0.0
    q: float = 0.0
    delta_c: float = 1.0
    delta_theta: float = 0.0
    t0: float = 1.0
    K1: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0 or self.a < 0 or self.p < 0:
            raise ValueError("beta, a and p must be nonnegative")
        if not 0 <= self.q < 1:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        if not self.delta_c > 0 or self.delta_theta < 0:
            raise ValueError("delta needs c > 0 and theta >= 0")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")

    def delta(self, t):
        return self.delta_c * np.power(t, self.delta_theta)

    def delta_dot(self, t):
        if self.delta_theta == 0:
            return 0.0 * np.asarray(t, dtype=float)
        return self.delta_c * self.delta_theta * np.power(t, self.delta_theta - 1.0)

    def condition_b_holds(self, K1=None):
        """Whether ``t delta'(t) <= K1 delta(t)`` holds (strictly) for large t.

        For a power law ``t delta'/delta = theta`` so this is ``K1 > theta``.
        """
        K1 = self.K1 if K1 is None else K1
        if K1 is None:
            K1 = self.delta_theta + 1.0
        return K1 > self.delta_theta


@dataclass
class PhaseState:
    t: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have equal shapes")


def special_case(params, system):
    """Map a named special case onto the general parameter family.

    ``"6"``: no Hessian damping, unit time scaling.
    ``"8"``: constant damping and constant regularization weight.
    ``"9"``: the general system, returned unchanged.
    """
    system = str(system)
    if system == "6":
        return replace(params, beta=0.0, delta_c=1.0, delta_theta=0.0)
    if system == "8":
        return replace(params, q=0.0, p=0.0)
    if system == "9":
        return params
    raise ValueError(f"unknown system {system!r}")


def phase_rhs(t, state, params, oracle):
    """Right-hand side ``(x', y')`` of the first-order reformulation."""
    if t < params.t0 * (1 - 1e-15) or t <= 0:
        raise ValueError(f"time {t} precedes t0={params.t0}")
    x, y = state.x, state.y
    grad = oracle.gradient(x)
    damp = params.alpha / t ** params.q
    xdot = y - params.beta * grad
    ydot = -damp * y - (params.delta(t) - params.beta * damp) * grad - (params.a / t ** params.p) * x
    return xdot, ydot


def lipschitz_envelope(t, params, Lg):
    """Lipschitz bound of the phase-space vector field at time t."""
    r2 = np.sqrt(2.0)
    damp = params.alpha / t ** params.q
    return (r2 + r2 * damp + r2 * params.beta * Lg
            + 2.0 * Lg * abs(params.delta(t) - params.beta * damp)
            + 2.0 * params.a / t ** params.p)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4
# Continuous extension: y(t + s h) = y + h * K^T (P [s, s^2, s^3, s^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson-style, as in Hairer's DOPRI5)
_PI_BETA = 0.04
_PI_ALPHA = 0.2 - 0.75 * _PI_BETA


TRAJECTORY_COLUMNS_TAIL = ["g_gap", "grad_norm", "dist_min_norm", "energy_Eb", "energy_E", "step_size"]


def TRAJECTORY_COLUMNS(dim):
    """Header of the trajectory CSV for a state of the given dimension."""
    return ["t"] + [f"x{i + 1}" for i in range(dim)] + TRAJECTORY_COLUMNS_TAIL


def format_float(v):
    """Shortest round-trip decimal; empty string for NaN."""
    v = float(v)
    if np.isnan(v):
        return ""
    return repr(v)


@dataclass
class Trajectory:
    """Sampled run record.

    Arrays are indexed by sample; ``x``, ``y`` and ``velocity`` have shape
    ``(n_samples, dim)``. Energy columns stay NaN until filled by an auditor.
    """

    params: FlowParams
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    velocity: np.ndarray
    g_gap: np.ndarray
    grad_norm: np.ndarray
    dist_min_norm: np.ndarray
    step_size: np.ndarray
    accepted: int
    rejected: int
    wall_time: float
    energy_Eb: np.ndarray = field(default=None)
    energy_E: np.ndarray = field(default=None)
    step_times: Optional[np.ndarray] = None
    step_states: Optional[np.ndarray] = None
    oracle_name: str = ""

    def __post_init__(self):
        n = len(self.t)
        if self.energy_Eb is None:
            self.energy_Eb = np.full(n, np.nan)
        if self.energy_E is None:
            self.energy_E = np.full(n, np.nan)

    @property
    def avg_step(self):
        return float((self.t[-1] - self.params.t0) / max(self.accepted, 1))

    @property
    def dimension(self):
        return self.x.shape[1]

    def __len__(self):
        return len(self.t)

    def sample(self, i):
        """Single record as ``(t, x, velocity, y)``."""
        return self.t[i], self.x[i], self.velocity[i], self.y[i]

    def rows(self):
        for i in range(len(self.t)):
            yield ([self.t[i], *self.x[i], self.g_gap[i], self.grad_norm[i],
                    self.dist_min_norm[i], self.energy_Eb[i], self.energy_E[i],
                    self.step_size[i]])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRAJECTORY_COLUMNS(self.dimension)) + "\n")
            for row in self.rows():
                fh.write(",".join(format_float(v) for v in row) + "\n")


def _error_norm(err, y, ynew, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate(params, oracle, x0, v0, t_end, rtol=1e-6, atol=1e-9, n_samples=400,
              t_eval=None, record_steps=False, max_steps=10_000_000):
    """Integrate the flow from ``t0`` to ``t_end`` with adaptive DOPRI5(4).

    Parameters
    ----------
    params : FlowParams
    oracle : ObjectiveOracle
    x0, v0 : array_like
        Position and velocity at ``params.t0``. The auxiliary variable starts
        at ``y0 = v0 + beta grad g(x0)``.
    t_end : float
    rtol, atol : float
        Mixed per-component tolerance ``atol + rtol |state|``.
    n_samples : int
        Points of the logarithmic output grid (ignored if ``t_eval`` given).
    t_eval : array_like, optional
        Explicit increasing output times inside ``[t0, t_end]``.
    record_steps : bool
        Keep the state at every accepted step.

    Returns
    -------
    Trajectory
    """
    t0 = float(params.t0)
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed t0={t0}")
    x0 = oracle.check_domain(x0)
    v0 = np.asarray(v0, dtype=float)
    n = x0.shape[0]
    if t_eval is None:
        grid = np.geomspace(t0, t_end, n_samples)
        grid[0], grid[-1] = t0, t_end
    else:
        grid = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(grid) <= 0) or grid[0] < t0 or grid[-1] > t_end:
            raise ValueError("t_eval must be strictly increasing inside [t0, t_end]")

    alpha, beta, a, p, q = params.alpha, params.beta, params.a, params.p, params.q
    grad = oracle.gradient
    nfev = 0

    def f(t, z):
        nonlocal nfev
        nfev += 1
        x, y = z[:n], z[n:]
        g = grad(x)
        damp = alpha / t ** q
        out = np.empty_like(z)
        out[:n] = y - beta * g
        out[n:] = -damp * y - (params.delta(t) - beta * damp) * g - (a / t ** p) * x
        return out

    start = time.perf_counter()
    z = np.concatenate([x0, v0 + beta * grad(x0)])
    t = t0
    k = np.empty((7, 2 * n))
    k[0] = f(t, z)
    h = 1e-3 * t0
    err_old = 1e-4
    accepted = rejected = 0

    out_z = np.empty((len(grid), 2 * n))
    out_h = np.empty(len(grid))
    gi = 0
    while gi < len(grid) and grid[gi] <= t:
        out_z[gi] = z
        out_h[gi] = np.nan
        gi += 1
    steps_t, steps_z = ([t], [z.copy()]) if record_steps else (None, None)

    last_rejected = False
    while t < t_end:
        if accepted + rejected >= max_steps:
            raise RuntimeError(f"exceeded {max_steps} steps at t={t}")
        if h < 1e-14 * t:
            raise StiffnessError(t, h)
        h_eff = min(h, t_end - t)
        # avoid a sliver final step
        if t + h_eff > t_end - 1e-12 * t_end:
            h_eff = t_end - t
        for i in range(1, 7):
            dz = np.dot(_A[i], k[:i]) if i > 1 else _A[1][0] * k[0]
            k[i] = f(t + _C[i] * h_eff, z + h_eff * dz)
        z_new = z + h_eff * np.dot(_A[6], k[:6])
        err = _error_norm(h_eff * np.dot(_E, k), z, z_new, rtol, atol)
        if err <= 1.0:
            t_new = t + h_eff if h_eff != t_end - t else t_end
            # dense output on grid points inside (t, t_new]
            if gi < len(grid) and grid[gi] <= t_new:
                Q = k.T @ _P
                while gi < len(grid) and grid[gi] <= t_new:
                    s = (grid[gi] - t) / h_eff
                    if grid[gi] == t_new:
                        out_z[gi] = z_new
                    else:
                        out_z[gi] = z + h_eff * (Q @ np.array([s, s * s, s ** 3, s ** 4]))
                    out_h[gi] = h_eff
                    gi += 1
            err = max(err, 1e-10)
            factor = SAFETY * err ** (-_PI_ALPHA) * err_old ** _PI_BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if last_rejected:
                factor = min(1.0, factor)
            err_old = err
            h = h_eff * factor
            t, z = t_new, z_new
            k[0] = k[6]
            accepted += 1
            last_rejected = False
            if record_steps:
                steps_t.append(t)
                steps_z.append(z.copy())
        else:
            factor = max(MIN_FACTOR, SAFETY * err ** (-0.2))
            h = h_eff * factor
            rejected += 1
            last_rejected = True
    wall = time.perf_counter() - start
    out_h[np.isnan(out_h)] = out_h[~np.isnan(out_h)][0] if np.any(~np.isnan(out_h)) else h

    xs = out_z[:, :n]
    ys = out_z[:, n:]
    grads = np.array([grad(xi) for xi in xs])
    vel = ys - beta * grads
    gap = np.array([oracle.objective_gap(xi) for xi in xs]) if _has_gap(oracle) else np.full(len(grid), np.nan)
    try:
        xbar = min_norm_solution(oracle)
        dist = np.linalg.norm(xs - xbar, axis=1)
    except UnknownSolutionSet:
        dist = np.full(len(grid), np.nan)
    traj = Trajectory(
        params=params, t=grid.copy(), x=xs, y=ys, velocity=vel, g_gap=gap,
        grad_norm=np.linalg.norm(grads, axis=1), dist_min_norm=dist, step_size=out_h,
        accepted=accepted, rejected=rejected, wall_time=wall, oracle_name=oracle.name,
    )
    if record_steps:
        traj.step_times = np.array(steps_t)
        traj.step_states = np.array(steps_z)
    return traj


def _has_gap(oracle):
    return oracle.gap is not None or oracle.known_min_value is not None
