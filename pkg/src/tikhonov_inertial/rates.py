"""Rate-regime classification and empirical log-log slope fitting.

``predict_rates`` maps a parameter bundle onto the applicable convergence
statement and returns total power-law exponents, with the time-scaling
exponent ``theta`` of ``delta = c t^theta`` folded in. ``fit_loglog_slope``
measures slopes from sampled runs so the two can be compared.

Case identifiers
----------------
continuous, weak-rate family (``q < p <= 2``)
    ``weak-i`` for ``2q < p <= 2``, ``weak-ii`` for ``q < p <= 2q``.
continuous, strong-convergence family (``q < p < q + 1``)
    ``strong-ii`` below ``(3q + 1)/2``, ``strong-iii`` from there on.
discrete
    ``energy-bounded`` for ``q + 1 < p <= 2``; ``strong-i``, ``strong-ii``,
    ``strong-iii`` for ``1 < p < q + 1`` split at ``2q`` and ``(3q + 1)/2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ipga import StepParams, growth_condition_check
from .lyapunov import strong_condition_threshold
from .ode import FlowParams

__all__ = [
    "RegimeReport",
    "SlopeFit",
    "SeriesExhausted",
    "predict_rates",
    "classify_continuous",
    "classify_discrete",
    "fit_loglog_slope",
    "iterations_to_tolerance",
    "little_o_holds",
    "SERIES_FLOOR",
]

SERIES_FLOOR = 1e-15


class SeriesExhausted(ValueError):
    """Every value in the fitting window sits at the floating-point floor."""


@dataclass
class RegimeReport:
    setting: str
    theorem_case: str
    condition_checks: list = field(default_factory=list)
    predicted_exponents: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)
    strong_case: Optional[str] = None
    strong_exponents: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_text(self):
        lines = [f"setting = {self.setting}", f"theorem_case = {self.theorem_case}"]
        if self.strong_case is not None:
            lines.append(f"strong_case = {self.strong_case}")
        for name, holds, where in self.condition_checks:
            lines.append(f"check.{name} = {'holds' if holds else 'fails'} @ {_fmt(where)}")
        for key, val in self.predicted_exponents.items():
            lines.append(f"exponent.{key} = {_fmt(val)}  [{self.sources.get(key, '')}]")
        for key, val in self.strong_exponents.items():
            lines.append(f"strong_exponent.{key} = {_fmt(val)}")
        for i, note in enumerate(self.notes):
            lines.append(f"note.{i} = {note}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "key", "value", "detail"])
        w.writerow(["case", "setting", self.setting, ""])
        w.writerow(["case", "theorem_case", self.theorem_case, ""])
        w.writerow(["case", "strong_case", self.strong_case or "", ""])
        for name, holds, where in self.condition_checks:
            w.writerow(["check", name, "true" if holds else "false", _fmt(where)])
        for key, val in self.predicted_exponents.items():
            w.writerow(["exponent", key, _fmt(val), self.sources.get(key, "")])
        for key, val in self.strong_exponents.items():
            w.writerow(["strong_exponent", key, _fmt(val), self.strong_case or ""])
        for note in self.notes:
            w.writerow(["note", "", note, ""])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    used_envelope: bool
    n_points: int


# ---------------------------------------------------------------------------
# Classification on (q, p) alone


def classify_continuous(q, p):
    """Case labels ``(weak, strong)`` from the ``(q, p)`` inequalities only."""
    if q < p <= 2 * q:
        weak = "weak-ii"
    elif 2 * q < p <= 2:
        weak = "weak-i"
    else:
        weak = "none"
    if q < p < (3 * q + 1) / 2:
        strong = "strong-ii"
    elif (3 * q + 1) / 2 <= p < q + 1:
        strong = "strong-iii"
    else:
        strong = None
    return weak, strong


def classify_discrete(q, p):
    if q + 1 < p <= 2:
        return "energy-bounded"
    if 1 < p < 2 * q and p < q + 1:
        return "strong-i"
    if 2 * q <= p < (3 * q + 1) / 2 and 1 < p:
        return "strong-ii"
    if (3 * q + 1) / 2 <= p < q + 1 and 1 < p:
        return "strong-iii"
    return "none"


# ---------------------------------------------------------------------------


def _continuous_report(P):
    q, p, th = P.q, P.p, P.delta_theta
    weak, strong = classify_continuous(q, p)
    checks = []
    notes = []
    K1 = P.K1 if P.K1 is not None else th + 1.0
    cond_b = K1 > th
    checks.append(("K1_time_scaling_growth", cond_b, K1))
    if P.K1 is None:
        notes.append(f"K1 = theta + 1 = {K1!r} used as witness; any K1 > theta works")
    failed = []
    if weak != "none":
        if p == 2:
            ok = P.a >= q * (1 - q)
            checks.append(("a>=q(1-q)_at_p=2", ok, q * (1 - q)))
            if not ok:
                failed.append("a>=q(1-q)")
        if not cond_b:
            failed.append("K1>theta")
    else:
        failed.append("q<p<=2")
    report = RegimeReport(setting="continuous", theorem_case="none" if failed else weak,
                          condition_checks=checks, notes=notes)
    if report.theorem_case == "weak-i":
        report.predicted_exponents = {"gap": -(2 * q + th), "velocity": -q}
    elif report.theorem_case == "weak-ii":
        report.predicted_exponents = {"gap": -(p + th), "velocity": -p / 2}
    for key in report.predicted_exponents:
        report.sources[key] = report.theorem_case
    if failed:
        notes.append("failed: " + ", ".join(failed))
    if q + 1 < p <= 2 and report.theorem_case != "none":
        notes.append("little-o: delta(t) t^(2q) gap -> 0 and t^q ||x' + beta grad g|| -> 0; "
                     "trajectory converges weakly to a minimizer")

    if strong is not None:
        tstar = strong_condition_threshold(P)
        checks.append(("strong_condition_t^p*ddelta+p*t^(p-1)*delta>=a*beta", bool(np.isfinite(tstar)), tstar))
        if np.isfinite(tstar) and cond_b:
            report.strong_case = strong
            r = max(q, p - q)
            if strong == "strong-ii":
                report.strong_exponents = {"velocity": -(p + 1 - r) / 2, "dist_to_path": -(1 - q) / 2,
                                           "gap": -(p + th)}
            else:
                gap = -(p + th) if p <= (4 * q + 2) / 3 else -(4 * q - 2 * p + 2 + th)
                report.strong_exponents = {"velocity": -(2 * q - p + 1), "dist_to_path": -(q - p + 1),
                                           "gap": gap}
                if p > (4 * q + 2) / 3:
                    notes.append(
                        "strong-iii gap exponent uses 4q-2p+2 (derivation and discrete analogue); "
                        f"the stated alternative 4p-2q+2 would give {-(4 * p - 2 * q + 2 + th)!r}"
                    )
    return report


def _default_growth_c(P):
    return P.delta_theta / P.p + 0.5 if P.p > 0 else 1.0


def _discrete_report(P, c=None, c0=None, scan_to=10_000):
    q, p, th, h = P.q, P.p, P.delta_theta, P.h
    case = classify_discrete(q, p)
    checks, notes, failed = [], [], []
    if P.delta_table is not None:
        notes.append("delta given as a table; exponents assume no extra power law (theta = 0)")
        th = 0.0
    if case == "energy-bounded":
        ok = P.alpha > h ** (q - 1)
        checks.append(("alpha>h^(q-1)", ok, h ** (q - 1)))
        if not ok:
            failed.append("alpha>h^(q-1)")
        if p == 2:
            ok2 = P.a > q * (1 - q)
            checks.append(("a>q(1-q)_at_p=2", ok2, q * (1 - q)))
            if not ok2:
                failed.append("a>q(1-q)")
    elif case.startswith("strong"):
        if q <= 0:
            failed.append("0<q")
        c = _default_growth_c(P) if c is None else c
        if P.delta_table is None:
            # power law: (k+1)^theta / k^theta against 1/(1 - c((1+1/k)^p - 1))
            eventually = th < c * p or th == 0
        else:
            eventually = True
        rep = growth_condition_check(P, p, c, (1, scan_to))
        holds = eventually and rep.first_index is not None
        checks.append((f"growth_condition(c={c!r})", holds, rep.first_index))
        if c == _default_growth_c(P):
            notes.append(f"growth constant c = theta/p + 1/2 = {c!r} used as witness")
        if not holds:
            failed.append("growth_condition")
        c0 = 1.0 if c0 is None else c0
        if P.delta_table is None:
            # delta_k^2 = c^2 h^(2 theta) k^(2 theta) >= c0 k^(p-q) eventually
            ok = 2 * th > p - q or (2 * th == p - q and P.delta_c ** 2 * h ** (2 * th) >= c0)
            where = None
            if ok:
                kk = np.arange(1, scan_to + 1, dtype=float)
                good = P.delta(kk) ** 2 >= c0 * kk ** (p - q)
                bad = np.flatnonzero(~good)
                where = 1 if bad.size == 0 else int(kk[bad[-1]]) + 1
        else:
            kk = np.arange(1, len(P.delta_table) + 1, dtype=float)
            good = P.delta(kk) ** 2 >= c0 * kk ** (p - q)
            ok = bool(good[-1])
            bad = np.flatnonzero(~good)
            where = 1 if bad.size == 0 else int(kk[bad[-1]]) + 1
        checks.append((f"delta_k^2>=c0*k^(p-q)(c0={c0!r})", bool(ok), where))
        if not ok:
            failed.append("delta_k^2>=c0*k^(p-q)")
    else:
        failed.append("q+1<p<=2 or 1<p<q+1")
    if P.delta_table is None and th <= 0:
        failed.append("delta_k->inf")
        checks.append(("delta_k->inf", False, None))
    report = RegimeReport(setting="discrete", theorem_case="none" if failed else case,
                          condition_checks=checks, notes=notes)
    case = report.theorem_case
    if case == "energy-bounded":
        report.predicted_exponents = {"gap": -(2 * q + th), "velocity": -q}
    elif case == "strong-i":
        e = (p - q + 1) / 2
        report.predicted_exponents = {"gap": -(p + th), "dist_to_path": -(1 - q) / 2,
                                      "gradient": -(e + th), "step_norm": -e}
    elif case == "strong-ii":
        e = (q + 1) / 2
        report.predicted_exponents = {"gap": -(p + th), "dist_to_path": -(1 - q) / 2,
                                      "gradient": -(e + th), "step_norm": -e}
    elif case == "strong-iii":
        e = 2 * q - p + 1
        gap = -(p + th) if p < (4 * q + 2) / 3 else -(4 * q - 2 * p + 2 + th)
        report.predicted_exponents = {"gap": gap, "dist_to_path": -(q - p + 1),
                                      "gradient": -(e + th), "step_norm": -e}
    for key in report.predicted_exponents:
        report.sources[key] = case
    if failed:
        notes.append("failed: " + ", ".join(failed))
    return report


def predict_rates(params, setting=None, c=None, c0=None):
    """Classify a parameter bundle and predict total rate exponents.

    Parameters
    ----------
    params : FlowParams or StepParams
    setting : {"continuous", "discrete"}, optional
        Inferred from the parameter type when omitted.
    c, c0 : float, optional
        Growth-condition constant and lower-bound constant for the discrete
        strong-convergence checks; witnesses are chosen when omitted.

    Returns
    -------
    RegimeReport
    """
    if setting is None:
        setting = "discrete" if isinstance(params, StepParams) else "continuous"
    if setting == "continuous":
        if not isinstance(params, FlowParams):
            raise TypeError("continuous setting needs FlowParams")
        return _continuous_report(params)
    if setting == "discrete":
        if not isinstance(params, StepParams):
            raise TypeError("discrete setting needs StepParams")
        return _discrete_report(params, c=c, c0=c0)
    raise ValueError(f"unknown setting {setting!r}")


# ---------------------------------------------------------------------------
# Empirical slopes


def fit_loglog_slope(t, values, window=(0.5, 1.0), envelope=False, bounds=None, floor=SERIES_FLOOR):
    """Least-squares slope of ``log(values)`` against ``log(t)``.

    Parameters
    ----------
    t, values : array_like
        Increasing abscissa and the series.
    window : tuple of float
        Fractions of the log-abscissa range to keep (ignored if ``bounds``).
    envelope : bool
        Replace the series by its running minimum first.
    bounds : tuple of float, optional
        Absolute abscissa window ``[lo, hi]``.
    floor : float
        Values at or below it are treated as exhausted and dropped.

    Raises
    ------
    SeriesExhausted
        If every value in the window is at or below ``floor``.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("t and values must be 1-D arrays of equal length")
    if np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise ValueError("abscissa must be positive and increasing")
    if envelope:
        v = np.minimum.accumulate(np.where(np.isnan(v), np.inf, v))
    lt = np.log(t)
    if bounds is not None:
        lo, hi = np.log(bounds[0]), np.log(bounds[1])
    else:
        span = lt[-1] - lt[0]
        lo, hi = lt[0] + window[0] * span, lt[0] + window[1] * span
    sel = (lt >= lo - 1e-12) & (lt <= hi + 1e-12)
    if not np.any(sel):
        raise ValueError("fitting window contains no samples")
    vs = v[sel]
    live = vs > floor
    if not np.any(live):
        raise SeriesExhausted("all values in the window are at the floating-point floor")
    if live.sum() < 10:
        raise ValueError(f"need at least 10 positive values in the window, got {int(live.sum())}")
    x = lt[sel][live]
    y = np.log(vs[live])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, min(1.0, 1.0 - float(resid @ resid) / sst))
    return SlopeFit(float(slope), float(intercept), r2, (float(np.exp(lo)), float(np.exp(hi))),
                    bool(envelope), int(live.sum()))


def iterations_to_tolerance(k, values, tol=1e-12, k_min=2):
    """First index ``>= k_min`` from which ``values <= tol`` holds for good.

    Returns ``inf`` if the series never settles below ``tol``.
    """
    k = np.asarray(k)
    v = np.asarray(values, dtype=float)
    mask = k >= k_min
    k, v = k[mask], v[mask]
    bad = np.flatnonzero(~(v <= tol))
    if bad.size == 0:
        return int(k[0])
    if bad[-1] == len(v) - 1:
        return float("inf")
    return int(k[bad[-1] + 1])


def little_o_holds(t, gap, params, tail=0.5):
    """Whether ``delta(t) t^(2q) gap`` sets no new maximum on the sampled tail."""
    t = np.asarray(t, dtype=float)
    scaled = params.delta(t) * t ** (2 * params.q) * np.asarray(gap, dtype=float)
    start = int(len(t) * (1 - tail))
    head_max = np.max(scaled[: start + 1])
    tail_vals = scaled[start + 1:]
    running = np.maximum.accumulate(np.concatenate([[head_max], tail_vals]))
    return bool(np.all(tail_vals <= running[:-1] * (1 + 1e-12)))
