"""Inertial proximal gradient algorithm (IPGA) and its discrete certificates.

One IPGA step with ``t_k = k h`` reads

    d_k   = (kh)^(q+p) / ((kh)^(q+p) + alpha h (kh)^p + a h^2 (kh)^q)
    rho_k = d_k (beta h + h^2 delta_k),   a_k = a (kh)^(-p)
    y_k   = x_k + d_k (x_k - x_{k-1} + beta h grad g(x_k))
    x_{k+1} = prox_{rho_k g}(y_k - h^2 d_k a_k x_k)

and is an implicit discretization of the continuous flow. This module also
evaluates the two discrete energies, the growth condition on ``delta_k``,
the drift of the discrete Tikhonov points, and the auxiliary coefficient
sequences whose eventual signs the rate proofs rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .lyapunov import LyapunovKnobs, tikhonov_gap
from .ode import format_float
from .problems import TikhonovKnobs, min_norm_solution, tikhonov_difference, tikhonov_minimizer

__all__ = [
    "StepParams",
    "StepCoefficients",
    "IterateLog",
    "AppendixRecord",
    "step_coefficients",
    "ipga_step",
    "step_residual",
    "step_residuals",
    "run_ipga",
    "discrete_energy",
    "default_lambda",
    "energy_decrement_audit",
    "appendix_sequences",
    "scan_appendix",
    "APPENDIX_CONDITIONS",
    "growth_condition_check",
    "GrowthReport",
    "discrete_tikhonov_drift",
    "pow_diff",
    "ITERATE_COLUMNS",
]


def pow_diff(k, j, e):
    """``(k + j)**e - k**e`` computed without cancellation for large ``k``."""
    k = np.asarray(k, dtype=float)
    return k ** e * np.expm1(e * np.log1p(j / k))


@dataclass(frozen=True)
class StepParams:
    """Discrete parameters; ``delta_k = delta_c (k h)^delta_theta`` unless a table is given.

    ``delta_table[k - 1]`` holds ``delta_k`` when a table is supplied.
    """

    h: float
    alpha: float
    beta: float = 0.0
    a: float = 0.0
    p: float = 0.0
    q: float = 0.0
    delta_c: float = 1.0
    delta_theta: float = 0.0
    delta_table: Optional[tuple] = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0 or self.a < 0 or self.p < 0:
            raise ValueError("beta, a and p must be nonnegative")
        if not 0 <= self.q < 1:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        if self.delta_table is None:
            if not self.delta_c > 0 or self.delta_theta < 0:
                raise ValueError("delta needs c > 0 and theta >= 0")
        else:
            tab = np.asarray(self.delta_table, dtype=float)
            if np.any(tab <= 0) or np.any(np.diff(tab) < 0):
                raise ValueError("delta table must be positive and non-decreasing")

    def delta(self, k):
        k = np.asarray(k, dtype=float)
        if self.delta_table is not None:
            tab = np.asarray(self.delta_table, dtype=float)
            idx = k.astype(int) - 1
            if np.any(idx < 0) or np.any(idx >= len(tab)):
                raise IndexError("delta table too short for requested index")
            return tab[idx]
        return self.delta_c * (k * self.h) ** self.delta_theta

    def log_delta_ratio(self, k, j=1):
        """``log(delta_{k+j} / delta_k)``, exact for power laws."""
        k = np.asarray(k, dtype=float)
        if self.delta_table is None:
            return self.delta_theta * np.log1p(j / k)
        return np.log(self.delta(k + j)) - np.log(self.delta(k))

    def qk(self, k):
        return (np.asarray(k, dtype=float) * self.h) ** self.q

    def ak(self, k):
        return self.a * (np.asarray(k, dtype=float) * self.h) ** (-self.p)

    def baseline(self, kind):
        if kind == "full":
            return self
        if kind == "no_hessian":
            return replace(self, beta=0.0)
        if kind == "no_decay":
            return replace(self, p=0.0, q=0.0)
        raise ValueError(f"unknown baseline {kind!r}; expected full, no_hessian or no_decay")


@dataclass(frozen=True)
class StepCoefficients:
    d: float
    rho: float
    a_k: float
    q_k: float
    delta_k: float


def step_coefficients(k, params):
    """Coefficients of step ``k`` (inertia, prox step, Tikhonov weight, damping scale)."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    h = params.h
    t = k * h
    # d_k with numerator and denominator divided by (kh)^(q+p)
    d = 1.0 / (1.0 + params.alpha * h / t ** params.q + params.a * h * h / t ** params.p)
    delta_k = float(params.delta(k))
    return StepCoefficients(
        d=d,
        rho=d * (params.beta * h + h * h * delta_k),
        a_k=params.a / t ** params.p,
        q_k=t ** params.q,
        delta_k=delta_k,
    )


def ipga_step(k, x_k, x_km1, params, oracle, coeffs=None):
    """One IPGA update producing ``x_{k+1}``."""
    c = step_coefficients(k, params) if coeffs is None else coeffs
    x_k = np.asarray(x_k, dtype=float)
    x_km1 = np.asarray(x_km1, dtype=float)
    h = params.h
    y = x_k + c.d * (x_k - x_km1 + params.beta * h * oracle.gradient(x_k))
    anchor = y - h * h * c.d * c.a_k * x_k
    return oracle.prox(c.rho, anchor) if c.rho > 0 else anchor


def step_residuals(k, x_km1, x_k, x_kp1, params, oracle):
    """Residual vectors of the three equivalent forms of a step.

    Returns ``(implicit, resolvent, weighted)``: the implicit second-order
    difference equation, the resolvent form ``(I + rho_k grad g)(x_{k+1}) =
    ...`` (equal to ``h^2 d_k`` times the first) and the ``q_k``-weighted
    form (equal to ``h^2 q_k`` times the first).
    """
    c = step_coefficients(k, params)
    h, alpha, beta = params.h, params.alpha, params.beta
    g1 = oracle.gradient(x_kp1)
    g0 = oracle.gradient(x_k)
    implicit = ((x_kp1 - 2 * x_k + x_km1) / (h * h)
                + alpha / c.q_k * (x_kp1 - x_k) / h
                + beta * (g1 - g0) / h
                + c.delta_k * g1
                + c.a_k * x_kp1)
    resolvent = (x_kp1 + c.rho * g1
                 - (x_k + c.d * (x_k - x_km1 + beta * h * g0) - h * h * c.d * c.a_k * x_k))
    weighted = (c.q_k * (x_kp1 - 2 * x_k + x_km1)
                + alpha * h * (x_kp1 - x_k)
                + h * (beta + h * c.delta_k) * c.q_k * g1
                - h * beta * c.q_k * g0
                + h * h * c.q_k * c.a_k * x_kp1)
    return implicit, resolvent, weighted


def step_residual(k, x_km1, x_k, x_kp1, params, oracle):
    """Norm of the implicit difference-equation residual at a triple."""
    return float(np.linalg.norm(step_residuals(k, x_km1, x_k, x_kp1, params, oracle)[0]))


ITERATE_TAIL = ["g_gap", "grad_norm", "dist_min_norm", "step_norm", "d_k", "rho_k", "a_k",
                "energy_calE", "energy_E"]


def ITERATE_COLUMNS(dim):
    return ["k"] + [f"x{i + 1}" for i in range(dim)] + ITERATE_TAIL


@dataclass
class IterateLog:
    """Iterates ``x_1 .. x_K`` (row ``i`` is ``x_{i+1}``) with diagnostics.

    ``x0`` is kept separately since the first step needs ``x_0``.
    Coefficient columns hold the values of the step leaving row ``k``.
    """

    params: StepParams
    baseline: str
    k: np.ndarray
    x: np.ndarray
    x0: np.ndarray
    g_gap: np.ndarray
    grad_norm: np.ndarray
    dist_min_norm: np.ndarray
    step_norm: np.ndarray
    d: np.ndarray
    rho: np.ndarray
    a_k: np.ndarray
    wall_time: float = 0.0
    energy_calE: np.ndarray = field(default=None)
    energy_E: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.k)
        if self.energy_calE is None:
            self.energy_calE = np.full(n, np.nan)
        if self.energy_E is None:
            self.energy_E = np.full(n, np.nan)

    def __len__(self):
        return len(self.k)

    @property
    def dimension(self):
        return self.x.shape[1]

    def iterate(self, k):
        """``x_k`` for ``0 <= k <= K``."""
        return self.x0 if k == 0 else self.x[k - 1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(ITERATE_COLUMNS(self.dimension)) + "\n")
            for i, k in enumerate(self.k):
                row = [*self.x[i], self.g_gap[i], self.grad_norm[i], self.dist_min_norm[i],
                       self.step_norm[i], self.d[i], self.rho[i], self.a_k[i],
                       self.energy_calE[i], self.energy_E[i]]
                fh.write(str(int(k)) + "," + ",".join(format_float(v) for v in row) + "\n")


def run_ipga(params, oracle, x0, x1, K, baseline="full"):
    """Run IPGA from ``(x_0, x_1)`` until ``x_K`` (``K - 1`` steps).

    ``baseline`` selects the full method, ``no_hessian`` (``beta = 0``) or
    ``no_decay`` (``p = q = 0``); all other parameters are shared.
    """
    import time

    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    run_params = params.baseline(baseline)
    x0 = oracle.check_domain(x0).copy()
    x1 = oracle.check_domain(x1).copy()
    n = x0.shape[0]
    xs = np.empty((K, n))
    xs[0] = x1
    coef = np.empty((K, 3))
    start = time.perf_counter()
    prev, cur = x0, x1
    for k in range(1, K + 1):
        c = step_coefficients(k, run_params)
        coef[k - 1] = (c.d, c.rho, c.a_k)
        if k == K:
            break
        nxt = ipga_step(k, cur, prev, run_params, oracle, coeffs=c)
        xs[k] = nxt
        prev, cur = cur, nxt
    wall = time.perf_counter() - start
    grads = np.array([oracle.gradient(x) for x in xs])
    try:
        gap = np.array([oracle.objective_gap(x) for x in xs])
    except Exception:
        gap = np.full(K, np.nan)
    try:
        dist = np.linalg.norm(xs - min_norm_solution(oracle), axis=1)
    except Exception:
        dist = np.full(K, np.nan)
    steps = np.linalg.norm(np.diff(np.vstack([x0, xs]), axis=0), axis=1)
    return IterateLog(
        params=run_params, baseline=baseline, k=np.arange(1, K + 1), x=xs, x0=x0,
        g_gap=gap, grad_norm=np.linalg.norm(grads, axis=1), dist_min_norm=dist,
        step_norm=steps, d=coef[:, 0], rho=coef[:, 1], a_k=coef[:, 2], wall_time=wall,
    )


# ---------------------------------------------------------------------------
# Appendix coefficient sequences

APPENDIX_CONDITIONS = {
    # name: (field, sign) with sign +1 for ">= 0" and -1 for "<= 0"
    "m_k>=0": ("m", 1),
    "n_k>=0": ("n", 1),
    "zeta_k>=0": ("zeta", 1),
    "ell_k>=0": ("ell", 1),
    "calB_k>=0": ("calB", 1),
    "mu_k>=0": ("mu", 1),
    "mu_{k+1}-mu_k-h*lam*calB_k<=0": ("mu_increment", -1),
    "b_k>=0": ("b", 1),
    "gamma_k>=0": ("gamma", 1),
    "xi_{k-1}>=0": ("xi_km1", 1),
    "eta_{k-1}>=0": ("eta_km1", 1),
    "sigma_k>=0": ("sigma", 1),
    "nu_k>=0": ("nu", 1),
    "omega_k>=0": ("omega", 1),
    "tau_k-sigma_k/2>=0": ("tau_minus_half_sigma", 1),
}


@dataclass(frozen=True)
class AppendixRecord:
    """Coefficient sequences at index ``k`` (scalars or arrays over ``k``)."""

    k: np.ndarray
    # sequences behind the first discrete energy
    m: np.ndarray
    n: np.ndarray
    zeta: np.ndarray
    ell: np.ndarray
    mu: np.ndarray
    calB: np.ndarray
    mu_increment: np.ndarray
    # sequences behind the second discrete energy
    b: np.ndarray
    B: np.ndarray
    gamma: np.ndarray
    xi_km1: np.ndarray
    eta_km1: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray
    omega: np.ndarray
    tau: np.ndarray
    tau_minus_half_sigma: np.ndarray
    s_k: np.ndarray


def _seq_core(k, P, lam, s):
    """All sequences as arrays over ``k`` (float array, ``k >= 2``)."""
    h, al, be, a, p, q = P.h, P.alpha, P.beta, P.a, P.p, P.q
    hq = h ** q
    qk = P.qk
    ak = P.ak

    def qa(j):
        # q_j a_j = a h^(q-p) j^(q-p)
        return a * h ** (q - p) * j ** (q - p)

    def dlt(j):
        return P.delta(j)

    def calB(j):
        return -be * hq * pow_diff(j, 1, q) + h * qk(j) * dlt(j)

    def ell(j):
        return -hq * pow_diff(j, 1, q) + al * h - lam

    def mu(j):
        return h * (qk(j) + al * h - lam) * calB(j) + h * be * ell(j) * qk(j + 1)

    def Bseq(j):
        return h * (be + h * dlt(j)) * qk(j)

    def bseq(j):
        return (qk(j - 1) + al * h) * Bseq(j - 1) - h * be * qk(j) ** 2

    def sigma(j):
        qa1 = qa(j - 1)
        # 1 - (a_j delta_{j-1}) / (a_{j-1} delta_j), via logs
        log_ratio = p * np.log1p(-1.0 / j) - P.log_delta_ratio(j - 1, 1)
        one_minus = -np.expm1(log_ratio)
        out = (qk(j - 1) + al * h) * h * h * qa1 * one_minus - (h * h * qa1) ** 2
        out = out + h * be * ak(j) / dlt(j) * (-(h ** (2 * q)) * pow_diff(j, -1, 2 * q) - al * h * qk(j - 1))
        return out

    cb = calB(k)
    lk = ell(k)
    muk = mu(k)
    q1 = qk(k + 1)
    m = 0.5 * h * h * be * q1 * (2 * cb - be * q1)
    ell_diff = hq * (pow_diff(k, 2, q) - 2 * pow_diff(k, 1, q))  # ell_k - ell_{k+1}
    n = 0.5 * lam * (h * h * qa(k) + ell_diff)
    zeta = 0.5 * h * h * (
        -a * h ** (2 * q - p) * pow_diff(k, 1, 2 * q - p)
        + al * h * (-a * h ** (q - p) * pow_diff(k, 1, q - p))
        - h * h * qa(k) ** 2
        + lam * qa(k + 1)
    )
    mu_inc = mu(k + 1) - muk - h * lam * cb

    Bk = Bseq(k)
    bk = bseq(k)
    gamma = hq * pow_diff(k, -1, q) + al * h - lam + 0.5 * h * h * qa(k - 1)
    xi = 0.5 * Bseq(k - 1) ** 2 - h * h * be * be * qk(k) ** 2 - 2 * lam * be * be * qk(k) ** 2 / qa(k - 1)
    eta = (h ** (2 * q) * pow_diff(k, -1, 2 * q) + 2 * al * h * qk(k - 1) + (al * h) ** 2
           - lam * qk(k) - 3 * lam * (qk(k - 1) + al * h + h * h * qa(k - 1))
           + (qk(k - 1) + al * h) * h * h * qa(k - 1))
    sig = sigma(k)
    nu = bk + lam * Bk - bseq(k + 1)
    sk = s * (k * h) ** (q - p) if s is not None else np.full_like(k, np.nan)
    second = hq * (pow_diff(k, 1, q) + pow_diff(k, -1, q))  # q_{k+1} + q_{k-1} - 2 q_k
    omega = 0.5 * lam * (second
                         - 2 * (al * h + h * h * qa(k) - hq * pow_diff(k, 1, q)) * sk
                         + 0.5 * h * h * qa(k - 1))
    tms = 0.5 * h * be * ak(k) / dlt(k) * (-(h ** (2 * q)) * pow_diff(k, 1, 2 * q) + (al * h - lam) * qk(k))
    return dict(
        k=k, m=m, n=n, zeta=zeta, ell=lk, mu=muk, calB=cb, mu_increment=mu_inc,
        b=bk, B=Bk, gamma=gamma, xi_km1=xi, eta_km1=eta, sigma=sig, nu=nu,
        omega=omega, tau=tms + 0.5 * sig, tau_minus_half_sigma=tms, s_k=sk,
    )


def appendix_sequences(k, params, lam, s=None):
    """Every coefficient sequence at index ``k`` (scalar or array, ``k >= 2``).

    ``s`` enters only ``s_k = s (kh)^(q-p)`` and ``omega_k``; it must satisfy
    ``s < h a / (4 alpha)`` for the sign of ``omega_k`` to be meaningful.
    """
    karr = np.asarray(k, dtype=float)
    if np.any(karr < 2):
        raise ValueError("appendix sequences need k >= 2")
    if s is not None and not s < params.h * params.a / (4 * params.alpha):
        raise ValueError(f"s={s} must be below h a / (4 alpha) = {params.h * params.a / (4 * params.alpha)}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _seq_core(karr, params, lam, s)
    if karr.ndim == 0:
        out = {key: float(v) for key, v in out.items()}
    return AppendixRecord(**out)


def scan_appendix(params, lam, s=None, k_max=10**6, chunk=200_000, conditions=None):
    """Locate the onset of every sign condition on ``[2, k_max]``.

    The onset is the smallest index from which the condition holds at every
    scanned index up to ``k_max``; ``None`` if it fails at ``k_max``.

    Returns
    -------
    dict
        condition name -> onset index (int or None).
    """
    names = list(APPENDIX_CONDITIONS) if conditions is None else list(conditions)
    if s is None:
        names = [nm for nm in names if APPENDIX_CONDITIONS[nm][0] != "omega"]
    last_fail = {nm: 1 for nm in names}
    start = 2
    while start <= k_max:
        stop = min(k_max, start + chunk - 1)
        k = np.arange(start, stop + 1, dtype=float)
        rec = appendix_sequences(k, params, lam, s)
        for nm in names:
            fld, sign = APPENDIX_CONDITIONS[nm]
            vals = sign * getattr(rec, fld)
            bad = np.flatnonzero(~(vals >= 0))
            if bad.size:
                last_fail[nm] = int(k[bad[-1]])
        start = stop + 1
    return {nm: (None if last_fail[nm] >= k_max else last_fail[nm] + 1) for nm in names}


# ---------------------------------------------------------------------------
# Discrete energies


def default_lambda(params, kind):
    """Admissible lambda: midpoint of ``(0, alpha h - h^q]`` or ``alpha h / 4``."""
    if kind == "calE":
        lam = 0.5 * (params.alpha * params.h - params.h ** params.q)
        if not lam > 0:
            raise ValueError("alpha h <= h^q: no admissible lambda for calE")
        return lam
    if kind == "E":
        return params.alpha * params.h / 4.0
    raise ValueError(f"unknown energy kind {kind!r}")


def _lam_from(knobs, params, kind):
    if knobs is None:
        return default_lambda(params, kind)
    return knobs.lam if isinstance(knobs, LyapunovKnobs) else float(knobs)


def _gap(oracle, x, xstar):
    if oracle.gap is not None:
        return oracle.objective_gap(x) - oracle.objective_gap(xstar)
    return float(oracle.value(x) - oracle.value(xstar))


def discrete_energy(log, kind, knobs=None, params=None, oracle=None, xstar=None):
    """Discrete energy at every logged index.

    ``kind="calE"`` anchors at a minimizer ``xstar``; ``kind="E"`` anchors at
    the discrete Tikhonov points ``xbar_k`` (``eps = a_k / delta_k``) and is
    undefined (NaN) at ``k = 1``.
    """
    params = log.params if params is None else params
    if oracle is None:
        raise ValueError("an oracle is required")
    lam = _lam_from(knobs, params, kind)
    h, beta = params.h, params.beta
    out = np.full(len(log), np.nan)
    if kind == "calE":
        xstar = min_norm_solution(oracle) if xstar is None else np.asarray(xstar, float)
        for i, k in enumerate(log.k):
            k = int(k)
            xk, xp = log.iterate(k), log.iterate(k - 1)
            qk = (k * h) ** params.q
            qk1 = ((k + 1) * h) ** params.q
            ak = params.a * (k * h) ** (-params.p)
            ell = qk - qk1 + params.alpha * h - lam
            calB = beta * (qk - qk1) + h * qk * float(params.delta(k))
            mu = h * (qk1 + ell) * calB + h * beta * ell * qk1
            d = xk - xstar
            v = lam * d + qk * (xk - xp + h * beta * oracle.gradient(xk))
            out[i] = (mu * _gap(oracle, xk, xstar) + 0.5 * v @ v + 0.5 * lam * ell * d @ d
                      + 0.5 * h * h * qk * ak * (qk1 + ell) * xk @ xk)
        return out
    if kind == "E":
        for i, k in enumerate(log.k):
            k = int(k)
            if k < 2:
                continue
            xk, xp = log.iterate(k), log.iterate(k - 1)
            q = params.q
            qk, qkm = (k * h) ** q, ((k - 1) * h) ** q
            ak, akm = params.ak(k), params.ak(k - 1)
            dk, dkm = float(params.delta(k)), float(params.delta(k - 1))
            Bkm = h * (beta + h * dkm) * qkm
            bk = (qkm + params.alpha * h) * Bkm - h * beta * qk ** 2
            gamma = qkm - qk + params.alpha * h - lam + 0.5 * h * h * qkm * akm
            xi = 0.5 * Bkm ** 2 - h * h * beta ** 2 * qk ** 2 - 2 * lam * beta ** 2 * qk ** 2 / (qkm * akm)
            eta = ((qkm + params.alpha * h) ** 2 - qk ** 2 - lam * qk
                   - 3 * lam * (qkm + params.alpha * h + h * h * qkm * akm)
                   + (qkm + params.alpha * h) * h * h * qkm * akm)
            sigma = (qkm + params.alpha * h - h * h * qkm * akm) * h * h * qkm * akm - bk * ak / dk
            eps = ak / dk
            xbar = tikhonov_minimizer(oracle, TikhonovKnobs(eps))
            grad = oracle.gradient(xk)
            d = xk - xbar
            v = lam * d + qk * (xk - xp + h * beta * grad)
            step = xk - xp
            out[i] = (bk * tikhonov_gap(oracle, eps, xk, xbar) + 0.5 * v @ v
                      + 0.5 * lam * gamma * d @ d + 0.5 * xi * grad @ grad
                      + 0.5 * eta * step @ step + 0.5 * sigma * xk @ xk)
        return out
    raise ValueError(f"unknown energy kind {kind!r}")


def energy_decrement_audit(log, energies, params, lam, xstar_norm, k_cap=200, rel_tol=1e-12):
    """Check ``E_{k+1} - E_k <= 0.5 a lam h^(q-p+2) ||x*||^2 k^(q-p)`` on a log.

    Returns ``(onset, ok)``: the smallest ``k`` from which the inequality holds
    at every logged step, and whether that onset is at most ``k_cap``. A
    rounding allowance of ``rel_tol * |E_k|`` is granted.
    """
    k = log.k[:-1].astype(float)
    inc = np.diff(energies)
    bound = 0.5 * params.a * lam * params.h ** (params.q - params.p + 2) * xstar_norm ** 2 * k ** (params.q - params.p)
    good = inc <= bound + rel_tol * np.abs(energies[:-1])
    bad = np.flatnonzero(~good)
    onset = int(log.k[0]) if bad.size == 0 else int(k[bad[-1]]) + 1
    if bad.size and bad[-1] == len(good) - 1:
        return None, False
    return onset, onset <= k_cap


# ---------------------------------------------------------------------------
# Growth condition and Tikhonov drift


@dataclass(frozen=True)
class GrowthReport:
    k_start: int
    k_end: int
    first_index: Optional[int]
    holds_beyond: bool
    denominator_first: Optional[int]
    c0_first: Optional[int]
    c0_holds_beyond: Optional[bool]


def _onset(k, ok):
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return int(k[0])
    if bad[-1] == len(ok) - 1:
        return None
    return int(k[bad[-1] + 1])


def growth_condition_check(delta_seq, p, c, k_range, c0=None, q=None):
    """Check ``delta_{k+1} <= k^p / ((1+c) k^p - c (k+1)^p) delta_k`` over a range.

    ``delta_seq`` is a StepParams (indices map to ``delta_k``), a callable
    ``k -> delta_k`` or an array with ``delta_seq[k-1] = delta_k``.
    The comparison is done on logarithms with ``expm1``/``log1p`` so it
    stays meaningful when ``delta_{k+1}/delta_k - 1`` is tiny.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    k0, k1 = int(k_range[0]), int(k_range[1])
    k = np.arange(k0, k1 + 1, dtype=float)
    if isinstance(delta_seq, StepParams):
        log_ratio = delta_seq.log_delta_ratio(k)
        dk = delta_seq.delta(k)
    elif callable(delta_seq):
        dk = np.asarray(delta_seq(k), dtype=float)
        log_ratio = np.log(np.asarray(delta_seq(k + 1), dtype=float)) - np.log(dk)
    else:
        tab = np.asarray(delta_seq, dtype=float)
        dk = tab[k.astype(int) - 1]
        log_ratio = np.log(tab[k.astype(int)]) - np.log(dk)
    # (1+c) k^p - c (k+1)^p = k^p (1 - c ((1+1/k)^p - 1))
    den = 1.0 - c * np.expm1(p * np.log1p(1.0 / k))
    den_ok = den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        allowed = np.where(den_ok, -np.log(np.where(den_ok, den, 1.0)), -np.inf)
    ok = den_ok & (log_ratio <= allowed)
    first = _onset(k, ok)
    c0_first = c0_beyond = None
    if c0 is not None:
        if q is None:
            raise ValueError("q is needed for the delta_k^2 >= c0 k^(p-q) check")
        okc = dk ** 2 >= c0 * k ** (p - q)
        c0_first = _onset(k, okc)
        c0_beyond = c0_first is not None
    return GrowthReport(k0, k1, first, first is not None, _onset(k, den_ok), c0_first, c0_beyond)


def discrete_tikhonov_drift(k, oracle, params, c=None):
    """Drift of the discrete Tikhonov points against its min-form bound.

    Returns
    -------
    drift : float
        ``||xbar_{k+1} - xbar_k||``.
    bound : float
        ``min{(r - 1) ||xbar_k||, (1 - 1/r) ||xbar_{k+1}||}`` with
        ``r = delta_{k+1} a_k / (delta_k a_{k+1})``.
    ok : bool
        ``drift <= bound (1 + 1e-6)``.
    asymptotic : float or None
        ``(1 + c) p / (k - c p) ||xbar*||`` when ``c`` is given and ``k > c p``.
    """
    eps_k = params.ak(k) / params.delta(k)
    eps_k1 = params.ak(k + 1) / params.delta(k + 1)
    xk = tikhonov_minimizer(oracle, TikhonovKnobs(float(eps_k)))
    xk1 = tikhonov_minimizer(oracle, TikhonovKnobs(float(eps_k1)))
    drift = float(np.linalg.norm(tikhonov_difference(oracle, float(eps_k), float(eps_k1))))
    log_r = float(params.log_delta_ratio(k) + params.p * np.log1p(1.0 / k))
    bound = min(np.expm1(log_r) * np.linalg.norm(xk), -np.expm1(-log_r) * np.linalg.norm(xk1))
    asym = None
    if c is not None and k > c * params.p:
        asym = (1 + c) * params.p / (k - c * params.p) * float(np.linalg.norm(min_norm_solution(oracle)))
    return drift, float(bound), bool(drift <= bound * (1 + 1e-6)), asym
