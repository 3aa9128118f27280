"""Variational-inequality estimation of the per-node GLM parameters.

The estimate is the weak solution of VI[F, Theta]: find theta_hat in the
feasible set with <F(theta), theta - theta_hat> >= 0 for all feasible theta,
where F is the empirical vector field (1/T) sum_t w_t (g(w_t' theta) - y_t).
Because F is monotone with modulus m_g * lambda_1, the solution is unique
whenever the Gram matrix is nonsingular, and extragradient iterations with
projections onto the constraint polytope converge to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSetError
from .model import DesignMatrix, LinkFunction, NodeModel, stack_designs


@dataclass
class FeasibleSet:
    """Convex compact parameter set: predictor slabs plus an inf-norm box.

    kind 'linear_link_polytope' encodes 0 <= w'theta <= 1 per kept design
    row; 'sigmoid_box_polytope' encodes -M <= w'theta <= M. The box
    ||theta||_inf <= theta_max makes the set compact.
    """

    kind: str
    constraint_rows: np.ndarray     # (m, N)
    lower: np.ndarray               # (m,)
    upper: np.ndarray               # (m,)
    theta_max: float
    feasible_point: np.ndarray

    def __post_init__(self):
        self.constraint_rows = np.asarray(self.constraint_rows, dtype=float)
        self._norms_sq = np.einsum("ij,ij->i", self.constraint_rows,
                                   self.constraint_rows)
        if not self.contains(self.feasible_point, tol=1e-9):
            raise InfeasibleSetError("constructed feasible point violates the set")

    @property
    def n_constraints(self) -> int:
        return self.constraint_rows.shape[0]

    def violations(self, theta: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Indices of slab constraints violated beyond tol."""
        u = self.constraint_rows @ theta
        return np.flatnonzero((u > self.upper + tol) | (u < self.lower - tol))

    def contains(self, theta: np.ndarray, tol: float = 1e-9) -> bool:
        if np.any(np.abs(theta) > self.theta_max + tol):
            return False
        return self.violations(theta, tol).size == 0

    def project(self, v: np.ndarray, tol: float = 1e-10,
                max_sweeps: int = 500) -> np.ndarray:
        """Euclidean projection via Dykstra's alternating projections.

        Only the slabs violated at entry join the working set; constraints
        satisfied at the computed point cannot change the projection, so the
        result equals the projection onto the full intersection once the
        outer loop finds no new violations.
        """
        x = np.clip(v, -self.theta_max, self.theta_max)
        active = list(self.violations(x, tol))
        if not active:
            return x
        for _outer in range(20):
            x = self._dykstra(v, active, tol, max_sweeps)
            new = [i for i in self.violations(x, tol) if i not in set(active)]
            if not new:
                # residual check: Dykstra's sweep cap may leave tiny slack on
                # the working set; the point is returned as-is
                return x
            active.extend(new)
        return x

    def pull_inside(self, theta: np.ndarray, margin: float = 1e-4) -> np.ndarray:
        """Shrink toward the strictly interior anchor, absorbing projection
        slop; useful when exact feasibility matters more than proximity."""
        return self.feasible_point + (1.0 - margin) * (theta - self.feasible_point)

    def _dykstra(self, v, active, tol, max_sweeps):
        rows = self.constraint_rows[active]
        lo = self.lower[active]
        up = self.upper[active]
        nrm = self._norms_sq[active]
        n_sets = len(active) + 1
        x = v.copy()
        corrections = [np.zeros_like(v) for _ in range(n_sets)]
        for _sweep in range(max_sweeps):
            shift = 0.0
            for k in range(n_sets):
                y = x + corrections[k]
                if k == 0:
                    proj = np.clip(y, -self.theta_max, self.theta_max)
                else:
                    i = k - 1
                    u = rows[i] @ y
                    excess = u - np.clip(u, lo[i], up[i])
                    proj = y - (excess / nrm[i]) * rows[i] if excess != 0.0 else y
                corrections[k] = y - proj
                shift = max(shift, float(np.max(np.abs(x - proj), initial=0.0)))
                x = proj
            if shift <= tol * 0.1:
                break
        return x

    def sample(self, n: int, rng, scale: float = 1.0) -> np.ndarray:
        """Feasible points: projections of Gaussian draws around the anchor."""
        dim = self.feasible_point.size
        out = np.empty((n, dim))
        for k in range(n):
            raw = self.feasible_point + scale * rng.standard_normal(dim)
            out[k] = self.project(raw)
        return out


def build_feasible_set(design: DesignMatrix, link: LinkFunction,
                       theta_max: float = 100.0, dedup_decimals: int = 9,
                       max_rows: int | None = None) -> FeasibleSet:
    """Constraint polytope for one node problem.

    Rows are deduplicated; with ``max_rows`` set, only rows attaining extreme
    per-column values (within a 1% band) are kept, which relaxes the polytope
    but keeps projections tractable for very long series.
    """
    rows = np.unique(np.round(design.rows, dedup_decimals), axis=0)
    if max_rows is not None and rows.shape[0] > max_rows:
        keep = np.zeros(rows.shape[0], dtype=bool)
        for k in range(rows.shape[1]):
            col = rows[:, k]
            span = col.max() - col.min()
            band = 0.01 * span if span > 0 else 0.0
            keep |= col >= col.max() - band
            keep |= col <= col.min() + band
        rows = rows[keep]
    m = rows.shape[0]
    if link.kind == "linear":
        kind = "linear_link_polytope"
        lower, upper = np.zeros(m), np.ones(m)
        anchor = np.zeros(design.N)
        anchor[0] = 0.5                      # first design column is constant 1
    else:
        kind = "sigmoid_box_polytope"
        lower = np.full(m, -link.domain_bound)
        upper = np.full(m, link.domain_bound)
        anchor = np.zeros(design.N)
    return FeasibleSet(kind, rows, lower, upper, theta_max, anchor)


def empirical_field(design: DesignMatrix, theta: np.ndarray,
                    link: LinkFunction) -> np.ndarray:
    """(1/T) sum_t w_t (g(w_t' theta) - y_t), the estimator's vector field."""
    u = design.rows @ np.asarray(theta, dtype=float)
    link.check_domain(u)
    lo, hi = link.domain
    resid = link(np.clip(u, lo, hi)) - design.responses
    if design.row_weights is not None:
        resid = resid * design.row_weights
    return design.rows.T @ resid / design.T


def power_iteration(mat: np.ndarray, iters: int = 500, tol: float = 1e-13,
                    seed: int = 7) -> float:
    """Largest eigenvalue of a symmetric PSD matrix."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(mat.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v_new = w / nrm
        if abs(nrm - lam) <= tol * max(1.0, nrm):
            return float(nrm)
        lam, v = nrm, v_new
    return float(lam)


@dataclass
class VIResult:
    theta_hat: np.ndarray
    residual: float            # natural residual ||theta - Proj(theta - gamma F)||
    iterations: int
    field_norm: float
    lambda1: float
    converged: bool
    method: str = "extragradient"


def _field_fn(design: DesignMatrix, link: LinkFunction):
    """Field evaluation used inside the solver (iterates stay feasible, so
    the domain check is skipped; the linear link gets the affine fast path)."""
    if link.kind == "linear":
        gram = design.gram
        b = design.weighted_mean_wy()
        return lambda th: gram @ th - b
    rows, resp, T = design.rows, design.responses, design.T
    weights = design.row_weights
    lo, hi = link.domain

    def field(th):
        u = np.clip(rows @ th, lo, hi)
        resid = link(u) - resp
        if weights is not None:
            resid = resid * weights
        return rows.T @ resid / T
    return field


def solve_vi(design: DesignMatrix, link: LinkFunction,
             feasible: FeasibleSet | None = None, tol: float = 1e-8,
             max_iter: int = 100000, init: np.ndarray | None = None,
             theta_max: float = 100.0, trace_fn=None) -> VIResult:
    """Extragradient iteration for VI[F, Theta].

    Step size 0.95/(M_g * lambda_max(gram)) with lambda_max from power
    iteration; terminates when the natural residual drops to ``tol``.
    Exhausting ``max_iter`` returns the best iterate with converged=False.
    The 0.95 factor is required: at step exactly 1/(M_g lambda_max) the
    extragradient map's top eigenmode factor 1 - x + x^2 equals 1 at x = 1,
    so affine fields stall instead of contracting.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if feasible is None:
        feasible = build_feasible_set(design, link, theta_max=theta_max)
    lam_max = power_iteration(design.gram)
    if lam_max <= 0:
        raise ValueError("degenerate design: zero Gram matrix")
    gamma = 0.95 / (link.M_g * lam_max)
    field = _field_fn(design, link)
    theta = feasible.project(np.asarray(init, dtype=float)) if init is not None \
        else feasible.feasible_point.copy()
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f1 = field(theta)
        mid = feasible.project(theta - gamma * f1)
        residual = float(np.linalg.norm(theta - mid))
        if trace_fn is not None and (it == 1 or it % 100 == 0):
            trace_fn(it, residual, float(np.linalg.norm(f1)))
        if residual <= tol:
            break
        f2 = field(mid)
        theta = feasible.project(theta - gamma * f2)
    fnorm = float(np.linalg.norm(field(theta)))
    return VIResult(theta, residual, it, fnorm, design.lambda1,
                    converged=residual <= tol)


def fit_lse_linear(design: DesignMatrix, feasible: FeasibleSet | None = None,
                   tol: float = 1e-10, max_iter: int = 200000,
                   theta_max: float = 100.0) -> VIResult:
    """Constrained least squares by projected gradient on the quadratic.

    Oracle implementation: minimizes (1/2T) sum (y - w'theta)^2 over the
    linear-link polytope, whose gradient field coincides with the VI field.
    """
    link = LinkFunction("linear")
    if feasible is None:
        feasible = build_feasible_set(design, link, theta_max=theta_max)
    gram = design.gram
    b = design.weighted_mean_wy()
    lam_max = power_iteration(gram)
    step = 1.0 / lam_max
    theta = feasible.feasible_point.copy()
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = gram @ theta - b
        nxt = feasible.project(theta - step * grad)
        residual = float(np.linalg.norm(theta - nxt))
        theta = nxt
        if residual <= tol:
            break
    fnorm = float(np.linalg.norm(gram @ theta - b))
    return VIResult(theta, residual, it, fnorm, design.lambda1,
                    converged=residual <= tol, method="lse_projected_gradient")


def class_balance_weights(responses: np.ndarray) -> np.ndarray:
    """Per-row weights T/(2 T_c) equalizing the two class masses."""
    from .selection import class_weights
    w = class_weights(responses)
    return np.where(responses > 0, w[1], w[0])


def fit_node(panels, target, d: int, link: LinkFunction, features=None,
             class_weighting: bool = False, standardize: bool = False,
             theta_max: float = 100.0, tol: float = 1e-8,
             max_iter: int = 100000, init: np.ndarray | None = None,
             trace_fn=None):
    """Fit one node across panels; returns (NodeModel, VIResult).

    ``standardize`` rescales non-constant design columns internally (exact
    affine reparametrization; coefficients are mapped back to raw units),
    which keeps the extragradient step usable on raw clinical scales.
    """
    design = stack_designs(panels, target, d, feature_subset=features)
    if class_weighting:
        design = DesignMatrix(design.rows, design.responses, design.layout,
                              design.target,
                              row_weights=class_balance_weights(design.responses))
    mu = np.zeros(design.N)
    sigma = np.ones(design.N)
    fit_design = design
    if standardize:
        mu[1:] = design.rows[:, 1:].mean(axis=0)
        sd = design.rows[:, 1:].std(axis=0)
        sigma[1:] = np.where(sd > 1e-12, sd, 1.0)
        rows = design.rows.copy()
        rows[:, 1:] = (rows[:, 1:] - mu[1:]) / sigma[1:]
        fit_design = DesignMatrix(rows, design.responses, design.layout,
                                  design.target, row_weights=design.row_weights)
    result = solve_vi(fit_design, link, tol=tol, max_iter=max_iter,
                      init=init, theta_max=theta_max, trace_fn=trace_fn)
    theta = result.theta_hat.copy()
    if standardize:
        raw = theta.copy()
        raw[1:] = theta[1:] / sigma[1:]
        raw[0] = theta[0] - np.sum(theta[1:] * mu[1:] / sigma[1:])
        theta = raw
        result.theta_hat = theta
    model = NodeModel(design.target, design.layout, link, theta)
    return model, result
