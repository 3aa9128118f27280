"""Stochastic-gradient alternates to the VI solver.

These fitters work in the decay parametrization (per-pair magnitudes A, B
with positive decays R, Rtilde) and descend the summed squared-error
objective. The 'vanilla' variant stops when the objective stops moving; the
'guarded' variant evaluates a held-out loss after every update and only
stores parameters that improve it, so its stored-loss trace is non-increasing
by construction.

Documented property (not an operation): the squared-error objective is
convex in the lag-expanded coefficients whenever the link is concave on its
domain; the identity link qualifies, the sigmoid does not, which is why the
guarded out-of-sample update rule exists at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LinkFunction, ThetaLayout, design_rows

_R_MIN = 1e-3


@dataclass
class SgdConfig:
    d: int = 1
    link: LinkFunction = field(default_factory=lambda: LinkFunction("linear"))
    eta: float = 5e-3
    epsilon: float = 1e-2           # stopping critical value on the loss delta
    max_iter: int = 200
    batch_size: int | None = None   # panels per step; None = all
    variant: str = "vanilla"        # 'vanilla' | 'guarded'
    loss: str = "least_square"      # held-out loss: 'least_square' | 'zero_one'
    threshold: float = 0.5          # zero_one decision threshold
    test_fraction: float = 0.2      # guarded variant's held-out panel share
    freeze_gamma: bool = True       # guarded variant fixes static effects at 0
    seed: int = 0


@dataclass
class SgdParams:
    nu: np.ndarray        # (n1,)
    Gamma: np.ndarray     # (n1, n3)
    A: np.ndarray         # (n1, n1)
    B: np.ndarray         # (n1, n2)
    R: np.ndarray         # (n1, n1) > 0
    Rtilde: np.ndarray    # (n1, n2) > 0

    def copy(self) -> "SgdParams":
        return SgdParams(self.nu.copy(), self.Gamma.copy(), self.A.copy(),
                         self.B.copy(), self.R.copy(), self.Rtilde.copy())

    def theta(self, i: int, layout: ThetaLayout) -> np.ndarray:
        taus = np.arange(1, layout.d + 1)
        beta = self.B[i][:, None] * np.exp(-self.Rtilde[i][:, None] * taus)
        alpha = self.A[i][:, None] * np.exp(-self.R[i][:, None] * taus)
        return layout.flatten(self.nu[i], self.Gamma[i], beta, alpha)


@dataclass
class SgdFit:
    params: SgdParams
    thetas: list[np.ndarray]
    layout: ThetaLayout
    objective_trace: list[float]
    stored_loss_trace: list[float]
    iterations: int


def _panel_designs(panels, d):
    """Per (panel, node) cached rows/responses, one shared layout."""
    cache = []
    layout = None
    for p in panels:
        per_node = []
        for i in range(p.n_y):
            rows, resp = design_rows(p, i, d)
            per_node.append((rows, resp))
        if layout is None:
            layout = ThetaLayout(p.z_names, p.x_names, p.y_names, d)
        cache.append(per_node)
    return cache, layout


def _objective(cache, params, layout, link, indices):
    total = 0.0
    for m in indices:
        for i, (rows, resp) in enumerate(cache[m]):
            u = rows @ params.theta(i, layout)
            total += float(np.sum((resp - link(u)) ** 2))
    return total


def _held_out_loss(cache, params, layout, cfg):
    total, count = 0.0, 0
    for per_node in cache:
        for i, (rows, resp) in enumerate(per_node):
            u = rows @ params.theta(i, layout)
            p = cfg.link(u)
            if cfg.loss == "zero_one":
                total += float(np.sum(np.abs(resp - (p >= cfg.threshold))))
            else:
                total += float(np.sum((resp - p) ** 2))
            count += resp.size
    return total / max(count, 1)


def _node_gradients(rows, resp, params, i, layout, link):
    """Chain rule from the lag-expanded gradient back to the decay params."""
    theta = params.theta(i, layout)
    u = rows @ theta
    common = 2.0 * (link(u) - resp) * link.derivative(u)
    g_theta = rows.T @ common
    s = layout.slices()
    d = layout.d
    taus = np.arange(1, d + 1)
    g_beta = g_theta[s["beta"]].reshape(-1, d)
    g_alpha = g_theta[s["alpha"]].reshape(-1, d)
    dec_b = np.exp(-params.Rtilde[i][:, None] * taus)
    dec_a = np.exp(-params.R[i][:, None] * taus)
    return {
        "nu": g_theta[0],
        "Gamma": g_theta[s["gamma"]],
        "B": np.sum(g_beta * dec_b, axis=1),
        "Rtilde": np.sum(g_beta * params.B[i][:, None] * (-taus) * dec_b, axis=1),
        "A": np.sum(g_alpha * dec_a, axis=1),
        "R": np.sum(g_alpha * params.A[i][:, None] * (-taus) * dec_a, axis=1),
    }


def fit_sgd(panels, config: SgdConfig, init: SgdParams | None = None) -> SgdFit:
    """Fit all nodes by (batch) gradient descent on the squared-error
    objective. Returns lag-expanded parameter vectors per node."""
    if not panels:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    guarded = config.variant == "guarded"
    if guarded and len(panels) >= 2:
        n_test = max(1, int(round(config.test_fraction * len(panels))))
        perm = rng.permutation(len(panels))
        test_idx = set(perm[:n_test].tolist())
        train_panels = [p for k, p in enumerate(panels) if k not in test_idx]
        test_panels = [p for k, p in enumerate(panels) if k in test_idx]
    else:
        train_panels, test_panels = list(panels), list(panels)
    if not train_panels:
        raise ValueError("empty training set after split")

    cache, layout = _panel_designs(train_panels, config.d)
    test_cache, _ = _panel_designs(test_panels, config.d)
    n1, n2, n3 = len(layout.y_names), len(layout.x_names), len(layout.z_names)
    params = init.copy() if init is not None else SgdParams(
        nu=np.zeros(n1), Gamma=np.zeros((n1, n3)), A=np.zeros((n1, n1)),
        B=np.zeros((n1, n2)), R=np.ones((n1, n1)), Rtilde=np.ones((n1, n2)))

    all_idx = np.arange(len(train_panels))
    # Stopping objective is evaluated on the full training set for stability.
    obj_trace = [_objective(cache, params, layout, config.link, all_idx)]
    stored = params.copy()
    stored_loss = _held_out_loss(test_cache, params, layout, config) if guarded else np.inf
    stored_trace = [stored_loss] if guarded else []
    prev_metric = np.inf
    cur_metric = stored_loss if guarded else obj_trace[-1]
    it = 0
    while abs(prev_metric - cur_metric) > config.epsilon and it < config.max_iter:
        it += 1
        if config.batch_size is not None and config.batch_size < len(train_panels):
            batch = rng.choice(all_idx, size=config.batch_size, replace=False)
        else:
            batch = all_idx
        grads = None
        for m in batch:
            for i, (rows, resp) in enumerate(cache[m]):
                g = _node_gradients(rows, resp, params, i, layout, config.link)
                if grads is None:
                    grads = {k: [np.zeros_like(np.atleast_1d(v))
                                 for _ in range(n1)] for k, v in g.items()}
                for k, v in g.items():
                    grads[k][i] = grads[k][i] + v
        for i in range(n1):
            params.nu[i] -= config.eta * float(np.asarray(grads["nu"][i]).reshape(()))
            if not (guarded and config.freeze_gamma):
                params.Gamma[i] -= config.eta * grads["Gamma"][i]
            params.A[i] -= config.eta * grads["A"][i]
            params.R[i] = np.maximum(params.R[i] - config.eta * grads["R"][i], _R_MIN)
            if n2:
                params.B[i] -= config.eta * grads["B"][i]
                params.Rtilde[i] = np.maximum(
                    params.Rtilde[i] - config.eta * grads["Rtilde"][i], _R_MIN)
        obj_trace.append(_objective(cache, params, layout, config.link, all_idx))
        prev_metric = cur_metric
        if guarded:
            cur_metric = _held_out_loss(test_cache, params, layout, config)
            if cur_metric < stored_loss:
                stored = params.copy()
                stored_loss = cur_metric
                stored_trace.append(stored_loss)
        else:
            cur_metric = obj_trace[-1]

    final = stored if guarded else params
    thetas = [final.theta(i, layout) for i in range(n1)]
    return SgdFit(final, thetas, layout, obj_trace, stored_trace, it)
