"""Continuous-time energy functionals and decay audits.

Two energies are evaluated along sampled trajectories:

* ``Eb`` anchors at a minimizer ``x*`` and is used for the weak-rate regime.
* ``strong`` anchors at the moving Tikhonov point ``x_t``, the minimizer of
  ``g + eps(t)/2 ||.||^2`` with ``eps(t) = a / (delta(t) t^p)``.

The audit checks the integrated decay inequality
``E(t_j) <= E(t_i) + C int_{t_i}^{t_j} s^(q-p) ds`` with ``C`` fitted on the
first half of the post-onset tail and enforced on the second half.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import TikhonovKnobs, min_norm_solution, tikhonov_minimizer

__all__ = [
    "LyapunovKnobs",
    "DecayReport",
    "default_knobs",
    "energy_Eb",
    "energy_strong",
    "energy_series",
    "source_integral",
    "audit_series",
    "decay_audit",
    "eb_onset_index",
    "strong_condition",
    "strong_condition_threshold",
    "tikhonov_epsilon",
    "tikhonov_gap",
    "tikhonov_path_check",
    "AUDIT_COLUMNS",
]

AUDIT_COLUMNS = ["kind", "onset_t", "fitted_C", "max_violation", "passed"]


@dataclass(frozen=True)
class LyapunovKnobs:
    """Proof parameters ``b`` and ``lam``; ``r`` and ``K2`` derive from the flow.

    ``s`` and ``c0`` are only used by the discrete energies.
    """

    b: float
    lam: float = 1.0
    K: float = 1.0
    s: Optional[float] = None
    c0: Optional[float] = None

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")

    def validate(self, params):
        if not self.b < params.alpha:
            raise ValueError(f"b={self.b} must lie in (0, alpha={params.alpha})")
        return self

    @staticmethod
    def r(params):
        return max(params.q, params.p - params.q)

    @staticmethod
    def K2(params, K1=None):
        if K1 is None:
            K1 = params.K1 if params.K1 is not None else params.delta_theta + 1.0
        return (params.p + K1) ** 2


@dataclass(frozen=True)
class DecayReport:
    kind: str
    first_nonneg_index: int
    onset_index: int
    onset_t: float
    max_violation: float
    passed: bool
    fitted_source_constant: float
    tolerance: float

    def csv_row(self):
        return [self.kind, repr(float(self.onset_t)), repr(float(self.fitted_source_constant)),
                repr(float(self.max_violation)), "true" if self.passed else "false"]


def default_knobs(params):
    """``b = alpha/2``; ``lam`` at the midpoint of ``(alpha/a, alpha/b - 1)`` if nonempty."""
    b = params.alpha / 2.0
    lo = params.alpha / params.a if params.a > 0 else np.inf
    hi = params.alpha / b - 1.0
    if lo < hi:
        lam = 0.5 * (lo + hi)
    else:
        lam = min(params.alpha, params.a) / 4.0 if params.a > 0 else params.alpha / 4.0
        warnings.warn(
            f"lambda interval ({lo:.4g}, {hi:.4g}) is empty; using lambda={lam:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return LyapunovKnobs(b=b, lam=lam)


def _velocity_term(t, xdot, grad, params):
    # t^q (x' + beta grad g)
    return t ** params.q * (xdot + params.beta * grad)


def energy_Eb(sample, knobs, params, oracle, xstar):
    """Energy anchored at a minimizer ``xstar``.

    ``sample`` is ``(t, x, xdot)``.
    """
    t, x, xdot = sample[0], np.asarray(sample[1], float), np.asarray(sample[2], float)
    b, q = knobs.b, params.q
    xstar = np.asarray(xstar, float)
    grad = oracle.gradient(x)
    gap = _gap_to(oracle, x, xstar)
    coef_gap = params.delta(t) * t ** (2 * q) - params.beta * (b + 2 * q * t ** (q - 1) - params.alpha) * t ** q
    d = x - xstar
    w = b * d + _velocity_term(t, xdot, grad, params)
    return float(
        coef_gap * gap
        + 0.5 * params.a * t ** (2 * q - params.p) * np.dot(x, x)
        + 0.5 * np.dot(w, w)
        + 0.5 * b * (params.alpha - b - q * t ** (q - 1)) * np.dot(d, d)
    )


def _gap_to(oracle, x, xstar):
    if oracle.gap is not None and oracle.known_min_norm_solution is not None:
        return oracle.objective_gap(x) - oracle.objective_gap(xstar)
    return float(oracle.value(x) - oracle.value(xstar))


def tikhonov_epsilon(t, params):
    return params.a / (params.delta(t) * t ** params.p)


def tikhonov_gap(oracle, eps, x, xt):
    """``g_eps(x) - g_eps(xt)`` for ``g_eps = g + eps/2 ||.||^2``.

    For quadratic oracles the exact form ``0.5 (x-xt)^T (A + eps I)(x-xt)``
    is used, valid because ``xt`` minimizes ``g_eps``.
    """
    if oracle.quadratic is not None:
        A = oracle.quadratic[0]
        d = x - xt
        return float(0.5 * d @ A @ d + 0.5 * eps * d @ d)
    return float(oracle.value(x) - oracle.value(xt) + 0.5 * eps * (x @ x - xt @ xt))


def energy_strong(sample, knobs, params, oracle, xt=None, inner_tol=1e-12):
    """Energy anchored at the Tikhonov point ``x_t``.

    ``x_t`` is solved for unless given.
    """
    t, x, xdot = sample[0], np.asarray(sample[1], float), np.asarray(sample[2], float)
    b, q = knobs.b, params.q
    eps = tikhonov_epsilon(t, params)
    if xt is None:
        xt = tikhonov_minimizer(oracle, TikhonovKnobs(eps, inner_tol))
    grad = oracle.gradient(x)
    d = x - xt
    w = b * d + _velocity_term(t, xdot, grad, params)
    return float(
        params.delta(t) * t ** (2 * q) * tikhonov_gap(oracle, eps, x, xt)
        + 0.5 * b * (params.alpha - b - q * t ** (q - 1)) * np.dot(d, d)
        + 0.5 * np.dot(w, w)
    )


def energy_series(traj, kind, knobs, params, oracle, xstar=None):
    """Energy at every trajectory sample."""
    if kind == "Eb":
        if xstar is None:
            xstar = min_norm_solution(oracle)
        return np.array([energy_Eb((t, x, v), knobs, params, oracle, xstar)
                         for t, x, v in zip(traj.t, traj.x, traj.velocity)])
    if kind == "strong":
        return np.array([energy_strong((t, x, v), knobs, params, oracle)
                         for t, x, v in zip(traj.t, traj.x, traj.velocity)])
    raise ValueError(f"unknown energy kind {kind!r}")


def source_integral(t, exponent):
    """Antiderivative of ``s**exponent`` evaluated at ``t``."""
    t = np.asarray(t, float)
    if exponent == -1.0:
        return np.log(t)
    return t ** (exponent + 1.0) / (exponent + 1.0)


def _first_index_always(mask):
    """Smallest index after which ``mask`` is true for all remaining entries."""
    mask = np.asarray(mask, bool)
    bad = np.flatnonzero(~mask)
    if bad.size == 0:
        return 0
    idx = int(bad[-1]) + 1
    return idx if idx < mask.size else -1


def eb_onset_index(t, knobs, params):
    """First sample beyond which both sign conditions of ``Eb`` hold."""
    t = np.asarray(t, float)
    q, b = params.q, knobs.b
    c1 = params.delta(t) * t ** (2 * q) - params.beta * (b + 2 * q * t ** (q - 1) - params.alpha) * t ** q
    c2 = params.alpha - b - q * t ** (q - 1)
    return _first_index_always((c1 >= 0) & (c2 >= 0))


def strong_condition(t, params):
    """``t^p delta'(t) + p t^(p-1) delta(t) - a beta``."""
    t = np.asarray(t, float)
    p = params.p
    return t ** p * params.delta_dot(t) + p * t ** (p - 1) * params.delta(t) - params.a * params.beta


def strong_condition_threshold(params):
    """Time from which the strong-convergence condition holds for good.

    For ``delta = c t^theta`` the condition reads
    ``c (theta + p) t^(p + theta - 1) >= a beta``. Returns ``inf`` if it never
    holds eventually.
    """
    ab = params.a * params.beta
    t0 = params.t0
    if ab <= 0:
        return t0
    k = params.delta_c * (params.delta_theta + params.p)
    e = params.p + params.delta_theta - 1.0
    if k <= 0:
        return np.inf
    if e == 0:
        return t0 if k >= ab else np.inf
    if e < 0:
        return np.inf
    return max(t0, (ab / k) ** (1.0 / e))


def audit_series(t, E, source_exponent, onset=0, rel_tol=1e-6):
    """Integrated decay audit of a sampled energy series.

    Returns ``(C, max_violation, passed, scale)`` where ``C >= 0`` is the
    smallest source constant for which the first half of the tail satisfies
    ``E_j - E_i <= C (S_j - S_i)`` on all pairs, and the violation is the
    largest excess on second-half pairs.
    """
    t = np.asarray(t, float)[onset:]
    E = np.asarray(E, float)[onset:]
    if len(t) < 4:
        raise ValueError("need at least four samples beyond onset")
    S = source_integral(t, source_exponent)
    half = len(t) // 2
    E1, S1 = E[:half], S[:half]
    dE = E1[None, :] - E1[:, None]
    dS = S1[None, :] - S1[:, None]
    upper = np.triu(np.ones_like(dE, dtype=bool), 1)
    ratios = np.where(upper & (dS > 0), dE / np.where(dS > 0, dS, 1.0), -np.inf)
    C = max(0.0, float(ratios.max()))
    F = E[half:] - C * S[half:]
    run_min = np.minimum.accumulate(F)
    excess = F[1:] - run_min[:-1]
    viol = max(0.0, float(excess.max())) if excess.size else 0.0
    scale = abs(float(E[0]))
    return C, viol, viol <= rel_tol * scale, scale


def decay_audit(traj, kind, knobs, params, oracle, xstar=None, rel_tol=1e-6, energies=None):
    """Audit nonnegativity and integrated decay of an energy along ``traj``.

    The onset is the first sample beyond which the coefficient sign
    conditions hold (and, for ``strong``, the strong-convergence condition);
    the energy must stay nonnegative after it.
    """
    if len(traj.t) < 100:
        raise ValueError("decay audit needs at least 100 samples")
    E = energy_series(traj, kind, knobs, params, oracle, xstar) if energies is None else energies
    onset = eb_onset_index(traj.t, knobs, params)
    if kind == "strong" and onset >= 0:
        s_on = _first_index_always(strong_condition(traj.t, params) >= 0)
        onset = -1 if s_on < 0 else max(onset, s_on)
    if onset < 0 or onset > len(traj.t) - 4:
        return DecayReport(kind, -1, -1, float("nan"), float("inf"), False, float("nan"), rel_tol)
    nonneg = _first_index_always(E >= 0)
    C, viol, ok, scale = audit_series(traj.t, E, params.q - params.p, onset, rel_tol)
    passed = ok and nonneg >= 0 and nonneg <= onset
    return DecayReport(kind, nonneg, onset, float(traj.t[onset]), viol, bool(passed), C, rel_tol * scale)


def tikhonov_path_check(params, oracle, times, slack=0.05):
    """Check the path-speed bound ``||dx_t/dt|| <= (p/t + delta'/delta) ||x_t||``.

    Uses forward differences over the supplied (closely spaced) times and
    also checks ``||x_t|| <= ||xbar*||``.

    Returns
    -------
    dict
        ``max_ratio`` of difference quotient to bound, ``speed_ok``,
        ``norm_ok`` and the arrays used.
    """
    times = np.asarray(times, float)
    pts = np.array([tikhonov_minimizer(oracle, TikhonovKnobs(tikhonov_epsilon(t, params)))
                    for t in times])
    norms = np.linalg.norm(pts, axis=1)
    speed = np.linalg.norm(np.diff(pts, axis=0), axis=1) / np.diff(times)
    ti = times[:-1]
    bound = (params.p / ti + params.delta_dot(ti) / params.delta(ti)) * norms[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, speed / bound, np.where(speed > 0, np.inf, 0.0))
    xbar = min_norm_solution(oracle)
    nbar = float(np.linalg.norm(xbar))
    return {
        "times": times,
        "points": pts,
        "speed": speed,
        "bound": bound,
        "max_ratio": float(ratio.max()),
        "speed_ok": bool(np.all(speed <= bound * (1 + slack) + 1e-15)),
        "norm_ok": bool(np.all(norms <= nbar * (1 + 1e-12) + 1e-15)),
    }
