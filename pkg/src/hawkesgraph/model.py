"""GLM core: link functions, parameter layout and lag-window design matrices.

The conditional event model is P(y_t = 1 | history) = g(w_t' theta) where the
lag window w_t stacks a constant, the static covariates, d lags of each
continuous series and d lags of each (binarized) node series, in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError
from .panel import PatientPanel

# Predictor excursions smaller than this are treated as projection slop, not
# feasible-set breaches (Dykstra's 500-sweep cap leaves ~1e-6 residuals on
# hard instances).
_DOMAIN_SLACK = 1e-5


@dataclass(frozen=True)
class LinkFunction:
    """Monotone link with uniformly bounded derivative on its domain.

    linear: g(x) = x restricted to [0, 1], derivative bounds m_g = M_g = 1.
    sigmoid: g(x) = 1/(1+e^-x) restricted to [-M, M]; on that interval the
    derivative is bounded below by g'(M) and above by 1/4.
    """

    kind: str = "sigmoid"
    domain_bound: float = 10.0     # M; only used by the sigmoid link

    def __post_init__(self):
        if self.kind not in ("linear", "sigmoid"):
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.kind == "sigmoid" and self.domain_bound <= 0:
            raise ValueError("domain_bound must be positive")

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind == "linear":
            return (0.0, 1.0)
        return (-self.domain_bound, self.domain_bound)

    @property
    def m_g(self) -> float:
        if self.kind == "linear":
            return 1.0
        e = math.exp(-self.domain_bound)
        return e / (1.0 + e) ** 2

    @property
    def M_g(self) -> float:
        return 1.0 if self.kind == "linear" else 0.25

    def __call__(self, u):
        if self.kind == "linear":
            return u
        return 1.0 / (1.0 + np.exp(-u))

    def derivative(self, u):
        if self.kind == "linear":
            return np.ones_like(np.asarray(u, dtype=float))
        g = self(u)
        return g * (1.0 - g)

    def check_domain(self, u) -> None:
        lo, hi = self.domain
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u < lo - _DOMAIN_SLACK) or np.any(u > hi + _DOMAIN_SLACK):
            worst = float(u[np.argmax(np.maximum(lo - u, u - hi))])
            raise DomainError(
                f"predictor {worst:.6g} outside link domain [{lo:g}, {hi:g}]")


@dataclass(frozen=True)
class ThetaLayout:
    """Block structure of one node's parameter vector.

    Order: baseline, static coefficients, per-lag continuous coefficients
    (series-major, lag 1..d within a series), then per-lag node coefficients.
    """

    z_names: tuple[str, ...]
    x_names: tuple[str, ...]
    y_names: tuple[str, ...]
    d: int

    @property
    def size(self) -> int:
        return 1 + len(self.z_names) + self.d * (len(self.x_names) + len(self.y_names))

    def slices(self):
        n3, n2, n1, d = len(self.z_names), len(self.x_names), len(self.y_names), self.d
        return {
            "nu": slice(0, 1),
            "gamma": slice(1, 1 + n3),
            "beta": slice(1 + n3, 1 + n3 + d * n2),
            "alpha": slice(1 + n3 + d * n2, 1 + n3 + d * (n2 + n1)),
        }

    def flatten(self, nu, gamma, beta, alpha) -> np.ndarray:
        """Assemble theta from blocks; beta is (n_x, d), alpha is (n_y, d)."""
        beta = np.asarray(beta, dtype=float).reshape(len(self.x_names), self.d)
        alpha = np.asarray(alpha, dtype=float).reshape(len(self.y_names), self.d)
        return np.concatenate([[float(nu)],
                               np.asarray(gamma, dtype=float).reshape(-1),
                               beta.reshape(-1), alpha.reshape(-1)])

    def unflatten(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.size:
            raise ValueError(f"theta has size {theta.size}, layout wants {self.size}")
        s = self.slices()
        return {
            "nu": float(theta[s["nu"]][0]),
            "gamma": theta[s["gamma"]].copy(),
            "beta": theta[s["beta"]].reshape(len(self.x_names), self.d),
            "alpha": theta[s["alpha"]].reshape(len(self.y_names), self.d),
        }

    def column_names(self) -> list[str]:
        names = ["const"]
        names += [f"z:{n}" for n in self.z_names]
        for n in self.x_names:
            names += [f"x:{n}[t-{tau}]" for tau in range(1, self.d + 1)]
        for n in self.y_names:
            names += [f"y:{n}[t-{tau}]" for tau in range(1, self.d + 1)]
        return names


@dataclass
class DesignMatrix:
    """Stacked lag windows plus the Gram matrix and its smallest eigenvalue."""

    rows: np.ndarray           # (T_eff, N), first column all ones
    responses: np.ndarray      # (T_eff,) binary
    layout: ThetaLayout
    target: str
    M_w: float = field(init=False)
    gram: np.ndarray = field(init=False)
    lambda1: float = field(init=False)
    row_weights: np.ndarray | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        self.responses = np.asarray(self.responses, dtype=float)
        self._refresh()

    def _refresh(self):
        T = self.rows.shape[0]
        if self.row_weights is None:
            self.gram = self.rows.T @ self.rows / T
        else:
            w = np.asarray(self.row_weights, dtype=float)
            self.gram = (self.rows * w[:, None]).T @ self.rows / T
        self.M_w = float(np.max(np.abs(self.rows))) if T else 0.0
        eigs = np.linalg.eigvalsh(self.gram)
        self.lambda1 = float(max(eigs[0], 0.0))

    @property
    def T(self) -> int:
        return self.rows.shape[0]

    @property
    def N(self) -> int:
        return self.rows.shape[1]

    def weighted_mean_wy(self) -> np.ndarray:
        """(1/T) sum_t w_t y_t, the count vector used by the interval LPs."""
        if self.row_weights is None:
            return self.rows.T @ self.responses / self.T
        return (self.rows * self.row_weights[:, None]).T @ self.responses / self.T


def _select(names, subset):
    if subset is None:
        return list(names)
    return [n for n in names if n in subset]


def build_design(panel: PatientPanel, target, d: int,
                 feature_subset=None) -> DesignMatrix:
    """Assemble the lag-window design for one target node of one panel.

    ``target`` is a node name or index; responses are binarized via 1{y>0}.
    ``feature_subset`` restricts the z/x/y series entering the window (the
    target's own lags are included only if listed or if no subset is given).
    Raises InsufficientDataError when no full lag window fits (T <= d).
    """
    rows, resp = design_rows(panel, target, d, feature_subset)
    if rows.shape[0] == 0:
        raise InsufficientDataError(
            f"panel {panel.patient_id!r}: no usable rows for d={d}")
    layout = _layout_for(panel, d, feature_subset)
    name = target if isinstance(target, str) else panel.y_names[target]
    return DesignMatrix(rows, resp, layout, name)


def _layout_for(panel: PatientPanel, d: int, feature_subset=None) -> ThetaLayout:
    return ThetaLayout(
        z_names=tuple(_select(panel.z_names, feature_subset)),
        x_names=tuple(_select(panel.x_names, feature_subset)),
        y_names=tuple(_select(panel.y_names, feature_subset)),
        d=d,
    )


def design_rows(panel: PatientPanel, target, d: int, feature_subset=None):
    """Rows and responses for t = d+1..T, dropping any row whose window or
    response touches a masked-invalid entry."""
    if d < 1:
        raise ValueError("lag depth d must be >= 1")
    if panel.T <= d:
        raise InsufficientDataError(
            f"panel {panel.patient_id!r}: T={panel.T} <= d={d}")
    ti = target if isinstance(target, int) else panel.y_names.index(target)
    layout = _layout_for(panel, d, feature_subset)
    z_idx = [panel.z_names.index(n) for n in layout.z_names]
    x_idx = [panel.x_names.index(n) for n in layout.x_names]
    y_idx = [panel.y_names.index(n) for n in layout.y_names]
    T = panel.T
    n_rows = T - d
    yb = panel.binary_y()
    cols = [np.ones(n_rows)]
    valid = panel.y_mask[ti, d:].copy()
    for j in z_idx:
        cols.append(np.full(n_rows, panel.z[j]))
    for j in x_idx:
        for tau in range(1, d + 1):
            cols.append(panel.x[j, d - tau:T - tau])
            valid &= panel.x_mask[j, d - tau:T - tau]
    for j in y_idx:
        for tau in range(1, d + 1):
            cols.append(yb[j, d - tau:T - tau])
            valid &= panel.y_mask[j, d - tau:T - tau]
    rows = np.column_stack(cols)
    resp = yb[ti, d:]
    return rows[valid], resp[valid]


def stack_designs(panels, target, d: int, feature_subset=None,
                  row_weights=None) -> DesignMatrix:
    """Concatenate per-panel designs into one estimation problem."""
    all_rows, all_resp = [], []
    layout = None
    for p in panels:
        try:
            r, y = design_rows(p, target, d, feature_subset)
        except InsufficientDataError:
            continue
        if layout is None:
            layout = _layout_for(p, d, feature_subset)
        all_rows.append(r)
        all_resp.append(y)
    if not all_rows or sum(r.shape[0] for r in all_rows) == 0:
        raise InsufficientDataError(f"no usable rows for target {target!r}")
    rows = np.vstack(all_rows)
    resp = np.concatenate(all_resp)
    name = target if isinstance(target, str) else panels[0].y_names[target]
    return DesignMatrix(rows, resp, layout, name, row_weights=row_weights)


def predict(theta: np.ndarray, w: np.ndarray, link: LinkFunction):
    """Event probability g(w' theta); raises DomainError on a feasible-set
    breach (e.g. linear link with predictor outside [0, 1])."""
    u = np.asarray(w, dtype=float) @ np.asarray(theta, dtype=float)
    link.check_domain(u)
    lo, hi = link.domain
    return link(np.clip(u, lo, hi))


@dataclass(frozen=True)
class NodeModel:
    """A fitted per-node model: parameters plus enough context to predict."""

    target: str
    layout: ThetaLayout
    link: LinkFunction
    theta: np.ndarray

    @property
    def blocks(self):
        return self.layout.unflatten(self.theta)

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        u = rows @ self.theta
        lo, hi = self.link.domain
        return self.link(np.clip(u, lo, hi))

    def predict_panel(self, panel: PatientPanel, d: int | None = None):
        d = d if d is not None else self.layout.d
        subset = set(self.layout.z_names) | set(self.layout.x_names) | set(self.layout.y_names)
        rows, resp = design_rows(panel, self.target, d, subset)
        return self.predict_rows(rows), resp
