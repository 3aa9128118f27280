"""Uncertainty quantification for the VI estimates.

Three routes: (i) closed-form non-asymptotic error bounds driven by the
monotonicity modulus m_g * lambda_1; (ii) LP confidence intervals that trap
linear transforms a'theta between two linear programs whose feasible regions
band the vector field coordinatewise with the psi envelopes; (iii) bootstrap
intervals on edge weights with the zero-containment existence rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import FitFailureError, RankDeficiencyError, ValidationError
from .estimator import FeasibleSet, fit_node
from .model import DesignMatrix, LinkFunction


# ---------------------------------------------------------------------------
# Non-asymptotic error bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """All constants entering the high-probability error bound, echoed for
    auditability. kappa = m_g * lambda1 is the monotonicity modulus."""

    epsilon: float
    delta_inf_bound: float
    delta_l2_bound: float
    theta_error_bound: float
    m_g: float
    M_w: float
    lambda1: float
    N: int
    T: int
    kappa: float


def delta_inf_bound(M_w: float, N: int, T: int, epsilon: float) -> float:
    """High-probability sup-norm bound on the field evaluated at the truth."""
    return M_w * math.sqrt(math.log(2.0 * N / epsilon) / T)


def parameter_error_bound(design: DesignMatrix, link: LinkFunction,
                   epsilon: float) -> BoundReport:
    """(M_w / (m_g lambda_1)) sqrt(N log(2N/eps) / T) and its ingredients."""
    if not 0.0 < epsilon < 1.0:
        raise ValidationError("epsilon must lie in (0, 1)")
    if design.lambda1 <= 0.0:
        raise RankDeficiencyError(
            "Gram matrix is rank deficient (lambda_1 <= 0); "
            "collect more rows or drop collinear features")
    N, T = design.N, design.T
    d_inf = delta_inf_bound(design.M_w, N, T, epsilon)
    d_l2 = math.sqrt(N) * d_inf
    kappa = link.m_g * design.lambda1
    return BoundReport(
        epsilon=epsilon, delta_inf_bound=d_inf, delta_l2_bound=d_l2,
        theta_error_bound=d_l2 / kappa, m_g=link.m_g, M_w=design.M_w,
        lambda1=design.lambda1, N=N, T=T, kappa=kappa)


# ---------------------------------------------------------------------------
# psi envelopes and the LP confidence intervals
# ---------------------------------------------------------------------------

@dataclass
class PsiDiagnostics:
    radicand_clamps: int = 0
    nu_clips: int = 0


def _check_psi_args(nu: float, T: int, y: float) -> None:
    if not 0.0 <= nu <= 1.0:
        raise ValidationError(f"nu={nu} outside [0, 1]")
    if y <= 0.0:
        raise ValidationError("y must be positive")
    if T < 1:
        raise ValidationError("T must be >= 1")


def psi_lower(nu: float, T: int, y: float, u_reading: str = "y",
              diagnostics: PsiDiagnostics | None = None) -> float:
    """Lower envelope; 0 on the boundary branch nu <= y/(3T).

    The source formula contains an undefined symbol in two places; the
    default reading substitutes y (which matches the upper envelope's
    structure and is continuous at the branch point), ``u_reading='nu'``
    exposes the alternative substitution.
    """
    _check_psi_args(nu, T, y)
    if u_reading not in ("y", "nu"):
        raise ValidationError("u_reading must be 'y' or 'nu'")
    if nu <= y / (3.0 * T):
        return 0.0
    u = y if u_reading == "y" else nu
    rad = 2.0 * T * nu * y + y * y / 3.0 - (2.0 * u / T) * (y / 3.0 - nu * T) ** 2
    if rad < 0.0:
        rad = 0.0
        if diagnostics is not None:
            diagnostics.radicand_clamps += 1
    val = (T * nu + 2.0 * u / 3.0 - math.sqrt(rad)) / (T + 2.0 * y)
    return min(max(val, 0.0), 1.0)


def psi_upper(nu: float, T: int, y: float,
              diagnostics: PsiDiagnostics | None = None) -> float:
    """Upper envelope; 1 on the boundary branch nu >= 1 - y/(3T)."""
    _check_psi_args(nu, T, y)
    if nu >= 1.0 - y / (3.0 * T):
        return 1.0
    rad = 2.0 * T * nu * y + 5.0 * y * y / 3.0 - (2.0 * y / T) * (y / 3.0 + nu * T) ** 2
    if rad < 0.0:
        rad = 0.0
        if diagnostics is not None:
            diagnostics.radicand_clamps += 1
    val = (T * nu + 4.0 * y / 3.0 + math.sqrt(rad)) / (T + 2.0 * y)
    return min(max(val, 0.0), 1.0)


def nominal_level(s: float, N: int, T: int) -> float:
    """Confidence level 1 - 2N {s[log((s-1)T)+2] + 2} e^{1-s}; may be
    negative (vacuous) for small s — reported as computed."""
    if s <= 1.0:
        raise ValidationError("s must exceed 1")
    return 1.0 - 2.0 * N * (s * (math.log((s - 1.0) * T) + 2.0) + 2.0) * math.exp(1.0 - s)


def calibrate_s(target: float, N: int, T: int, s_max: float = 500.0) -> float:
    """Smallest s whose nominal level reaches ``target`` (bisection)."""
    if not 0.0 < target < 1.0:
        raise ValidationError("target must lie in (0, 1)")
    lo, hi = 1.0 + 1e-9, 2.0
    while nominal_level(hi, N, T) < target:
        hi *= 2.0
        if hi > s_max:
            raise ValidationError(f"no s <= {s_max} reaches level {target}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if nominal_level(mid, N, T) >= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class CiSpec:
    """Confidence parameter s > 1 plus the direction a of the transform."""

    s: float
    a: np.ndarray

    def __post_init__(self):
        if self.s <= 1.0:
            raise ValidationError("s must exceed 1")
        a = np.asarray(self.a, dtype=float)
        if not np.any(a != 0.0):
            raise ValidationError("direction a must be nonzero")
        object.__setattr__(self, "a", a)

    def nominal_level(self, N: int, T: int) -> float:
        return nominal_level(self.s, N, T)


@dataclass(frozen=True)
class CiInterval:
    lower: float
    upper: float
    feasible: bool = True
    conservative: bool = False


@dataclass(frozen=True)
class Envelope:
    """Linear sandwich f2 <= g <= f1 on the link domain."""

    upper_slope: float
    upper_intercept: float
    lower_slope: float
    lower_intercept: float

    def widen(self, delta: float) -> "Envelope":
        return Envelope(self.upper_slope, self.upper_intercept + delta,
                        self.lower_slope, self.lower_intercept - delta)


IDENTITY_ENVELOPE = Envelope(1.0, 0.0, 1.0, 0.0)


def sigmoid_linear_bounds(M: float, grid: int = 10000) -> Envelope:
    """Upper/lower lines sandwiching the sigmoid on [-M, M].

    The upper line passes through (-M, g(-M)) and is tangent to the concave
    branch at x1 >= 0 (root-found); the lower line is its point reflection
    through (0, 1/2). A dense sweep verifies the sandwich; any numerical
    violation is absorbed into the intercepts (secant/tangent fallback).
    """
    if M <= 0:
        raise ValidationError("M must be positive")

    def g(x):
        return 1.0 / (1.0 + np.exp(-x))

    gm = float(g(-M))

    def h(x1):
        gp = float(g(x1)) * (1.0 - float(g(x1)))
        return gp * (x1 + M) + gm - float(g(x1))

    lo, hi = 0.0, M
    if h(hi) > 0.0:
        # no interior tangency: fall back to the tangent at 0 lifted to cover
        # the convex branch
        a1 = 0.25
        b1 = 0.5 + (gm + 0.25 * M - 0.5)
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if h(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        x1 = 0.5 * (lo + hi)
        a1 = float(g(x1)) * (1.0 - float(g(x1)))
        b1 = float(g(x1)) - a1 * x1
    xs = np.linspace(-M, M, grid)
    gap = np.max(g(xs) - (a1 * xs + b1))
    if gap > 0.0:
        b1 += float(gap) + 1e-15
    return Envelope(a1, b1, a1, 1.0 - b1)


def _counts_to_nu(a_counts: np.ndarray, M_w: float,
                  diagnostics: PsiDiagnostics | None = None) -> np.ndarray:
    nu = np.asarray(a_counts, dtype=float) / M_w
    clipped = np.clip(nu, 0.0, 1.0)
    if diagnostics is not None:
        diagnostics.nu_clips += int(np.sum(np.abs(clipped - nu) > 0))
    return clipped


def _psi_bands(a_counts, M_w, T, s, diagnostics=None):
    nu = _counts_to_nu(a_counts, M_w, diagnostics)
    lo = np.array([psi_lower(v, T, s, diagnostics=diagnostics) for v in nu])
    hi = np.array([psi_upper(v, T, s, diagnostics=diagnostics) for v in nu])
    return lo, hi


def _solve_lp_pair(a, A_ub, b_ub, theta_max, n):
    bounds = [(-theta_max, theta_max)] * n
    res_lo = linprog(a, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    res_hi = linprog(-a, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res_lo.status == 2 or res_hi.status == 2:
        return CiInterval(math.nan, math.nan, feasible=False)
    if res_lo.status != 0 or res_hi.status != 0:
        raise FitFailureError(f"LP solver failed: {res_lo.message} / {res_hi.message}")
    return CiInterval(float(res_lo.fun), float(-res_hi.fun))


def ci_linear(design: DesignMatrix, feasible: FeasibleSet, spec: CiSpec,
              a_counts: np.ndarray | None = None,
              diagnostics: PsiDiagnostics | None = None,
              bands=None) -> CiInterval:
    """Interval for a'theta under the linear link: two LPs over the feasible
    polytope intersected with the per-coordinate band
    psi_l <= (gram theta)_k / M_w <= psi_u. ``bands`` overrides the psi
    computation with explicit (lower, upper) arrays."""
    if a_counts is None:
        a_counts = design.weighted_mean_wy()
    if bands is not None:
        lo, hi = np.asarray(bands[0], dtype=float), np.asarray(bands[1], dtype=float)
    else:
        lo, hi = _psi_bands(a_counts, design.M_w, design.T, spec.s, diagnostics)
    rows = feasible.constraint_rows
    A_ub = np.vstack([
        rows, -rows,
        design.gram, -design.gram,
    ])
    b_ub = np.concatenate([
        feasible.upper, -feasible.lower,
        design.M_w * hi, -design.M_w * lo,
    ])
    return _solve_lp_pair(spec.a, A_ub, b_ub, feasible.theta_max, design.N)


def ci_nonlinear(design: DesignMatrix, feasible: FeasibleSet, spec: CiSpec,
                 a_counts: np.ndarray | None = None,
                 envelope: Envelope | None = None,
                 diagnostics: PsiDiagnostics | None = None,
                 bands=None) -> CiInterval:
    """Conservative interval for a nonlinear link: the link inside the band
    constraints is replaced by its linear envelope, chosen per summand sign
    so the relaxed region contains the true one (outer approximation)."""
    if envelope is None:
        envelope = sigmoid_linear_bounds(10.0)
    if a_counts is None:
        a_counts = design.weighted_mean_wy()
    if bands is not None:
        lo, hi = np.asarray(bands[0], dtype=float), np.asarray(bands[1], dtype=float)
    else:
        lo, hi = _psi_bands(a_counts, design.M_w, design.T, spec.s, diagnostics)
    rows = design.rows
    T, N = design.T, design.N
    C = rows / (T * design.M_w)            # C[t, k] = (w_t)_k / (T M_w)
    pos = C >= 0.0
    a1, b1 = envelope.upper_slope, envelope.upper_intercept
    a2, b2 = envelope.lower_slope, envelope.lower_intercept
    # upper constraint k: sum_t C[t,k] f_sel(w_t' theta) <= hi_k with f_sel the
    # *lower* line where C >= 0 (and vice versa) — a linear lower bound on the
    # true sum
    slope_up = np.where(pos, a2, a1)        # (T, N)
    icpt_up = np.where(pos, b2, b1)
    vec_up = (C * slope_up).T @ rows        # (N, N): row k is the constraint
    const_up = np.sum(C * icpt_up, axis=0)
    # lower constraint k: linear upper bound on the sum must stay >= lo_k
    slope_dn = np.where(pos, a1, a2)
    icpt_dn = np.where(pos, b1, b2)
    vec_dn = (C * slope_dn).T @ rows
    const_dn = np.sum(C * icpt_dn, axis=0)
    A_ub = np.vstack([
        feasible.constraint_rows, -feasible.constraint_rows,
        vec_up, -vec_dn,
    ])
    b_ub = np.concatenate([
        feasible.upper, -feasible.lower,
        hi - const_up, -(lo - const_dn),
    ])
    interval = _solve_lp_pair(spec.a, A_ub, b_ub, feasible.theta_max, N)
    return CiInterval(interval.lower, interval.upper,
                      feasible=interval.feasible, conservative=True)


def coordinate_intervals(design: DesignMatrix, feasible: FeasibleSet, s: float,
                         link: LinkFunction, envelope: Envelope | None = None,
                         diagnostics: PsiDiagnostics | None = None):
    """Per-coordinate intervals by looping a = e_k (2N LP solves)."""
    out = []
    for k in range(design.N):
        a = np.zeros(design.N)
        a[k] = 1.0
        spec = CiSpec(s, a)
        if link.kind == "linear":
            out.append(ci_linear(design, feasible, spec, diagnostics=diagnostics))
        else:
            out.append(ci_nonlinear(design, feasible, spec, envelope=envelope,
                                    diagnostics=diagnostics))
    return out


# ---------------------------------------------------------------------------
# Bootstrap edge intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeInterval:
    source: str
    target: str
    lower: float
    upper: float
    median: float
    exists: bool
    weight: float


@dataclass
class BootstrapEdges:
    node_names: tuple[str, ...]
    intervals: list[list[EdgeInterval]]   # [target][source]
    B_effective: int
    n_failed: int

    def weight_matrix(self) -> np.ndarray:
        n = len(self.node_names)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                out[i, j] = self.intervals[i][j].weight
        return out

    def exists_matrix(self) -> np.ndarray:
        n = len(self.node_names)
        return np.array([[self.intervals[i][j].exists for j in range(n)]
                         for i in range(n)], dtype=bool)


def _edge_weights_from_model(model, node_names, lag_agg: str) -> np.ndarray:
    alpha = model.blocks["alpha"]         # (n_selected_y, d)
    out = np.zeros(len(node_names))
    for row, name in zip(alpha, model.layout.y_names):
        j = node_names.index(name)
        if lag_agg == "sum":
            out[j] = float(np.sum(row))
        elif lag_agg == "max_abs":
            out[j] = float(row[np.argmax(np.abs(row))])
        elif lag_agg == "first_lag":
            out[j] = float(row[0])
        else:
            raise ValidationError(f"unknown lag_agg {lag_agg!r}")
    return out


def bootstrap_edges(panels, d: int, link: LinkFunction, B: int = 1000,
                    level: float = 0.90, seed: int = 0, features=None,
                    lag_agg: str = "sum", tol: float = 1e-7,
                    max_iter: int = 100000, class_weighting: bool = False,
                    standardize: bool = False,
                    max_failure_fraction: float = 0.10,
                    zero_tol: float = 1e-6) -> BootstrapEdges:
    """Patient-level resampling with replacement; per-replicate refits; the
    (alpha/2, 1-alpha/2) quantiles per edge; an edge exists when its interval
    excludes zero, in which case the median is its weight.

    ``zero_tol`` pads the zero-containment test: an interval lying entirely
    within solver noise of zero (a no-signal edge) must not count as
    existing, and replicate estimates of an exactly-zero coefficient are
    one-signed at the solver tolerance scale.
    """
    if B < 2:
        raise ValidationError("B must be >= 2")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    names = panels[0].y_names
    n = len(names)
    warm: list[np.ndarray | None] = [None] * n
    for i, name in enumerate(names):
        try:
            _, res = fit_node(panels, name, d, link, features=features,
                              class_weighting=class_weighting,
                              standardize=standardize, tol=tol, max_iter=max_iter)
            warm[i] = res.theta_hat
        except Exception:
            warm[i] = None
    draws = np.full((B, n, n), np.nan)
    n_failed = 0
    for b in range(B):
        idx = rng.integers(0, len(panels), size=len(panels))
        sample = [panels[k] for k in idx]
        ok = True
        weights_b = np.zeros((n, n))
        for i, name in enumerate(names):
            try:
                model, res = fit_node(sample, name, d, link, features=features,
                                      class_weighting=class_weighting,
                                      standardize=standardize, tol=tol,
                                      max_iter=max_iter, init=warm[i])
            except Exception:
                ok = False
                break
            if not res.converged:
                ok = False
                break
            weights_b[i] = _edge_weights_from_model(model, list(names), lag_agg)
        if ok:
            draws[b] = weights_b
        else:
            n_failed += 1
    if n_failed > max_failure_fraction * B:
        raise FitFailureError(
            f"{n_failed}/{B} bootstrap replicates failed to fit")
    good = draws[~np.isnan(draws[:, 0, 0])]
    alpha = 1.0 - level
    lo = np.quantile(good, alpha / 2.0, axis=0)
    hi = np.quantile(good, 1.0 - alpha / 2.0, axis=0)
    med = np.quantile(good, 0.5, axis=0)
    intervals = []
    for i in range(n):
        row = []
        for j in range(n):
            exists = not (lo[i, j] <= zero_tol and hi[i, j] >= -zero_tol)
            row.append(EdgeInterval(
                source=names[j], target=names[i],
                lower=float(lo[i, j]), upper=float(hi[i, j]),
                median=float(med[i, j]), exists=exists,
                weight=float(med[i, j]) if exists else 0.0))
        intervals.append(row)
    return BootstrapEdges(names, intervals, good.shape[0], n_failed)
