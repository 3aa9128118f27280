"""Greedy forward feature selection with held-out validation.

Candidates are series names (node, exogenous or static); a fit on a feature
subset only sees that subset's design columns. Each round fits one model per
unselected candidate and keeps the best one if it improves the held-out
criterion by at least ``min_gain``; ties break toward the lower candidate
index so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CriterionUndefinedError, ValidationError
from .estimator import build_feasible_set, solve_vi
from .model import DesignMatrix, LinkFunction, NodeModel, stack_designs

CRITERIA = ("tp_rate", "classification_error", "auc")


@dataclass
class CvConfig:
    criterion: str = "tp_rate"
    split: float = 0.8                 # training fraction of rows
    decision_threshold: float = 0.5
    class_weighting: bool = True
    max_iter_grid: tuple[int, ...] = (100, 1000, 10000)
    min_gain: float = 1e-4
    d: int = 1
    link: LinkFunction = field(default_factory=LinkFunction)
    standardize: bool = False
    solver_tol: float = 1e-7
    solver_max_iter: int = 20000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValidationError("split must lie in (0, 1)")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValidationError("decision_threshold must lie in (0, 1)")
        if self.criterion not in CRITERIA:
            raise ValidationError(f"unknown criterion {self.criterion!r}")


@dataclass
class SelectionTrace:
    criterion: str
    initial_subset: tuple[str, ...]
    steps: list[tuple[str, float]]     # (added feature, criterion after adding)
    final_subset: tuple[str, ...]
    baseline_value: float


def class_weights(labels: np.ndarray) -> tuple[float, float]:
    """(negative, positive) weights T/(2 T_c): weighted class masses match."""
    labels = np.asarray(labels)
    n = labels.size
    n_pos = int(np.sum(labels > 0))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("class weights need both classes present")
    return n / (2.0 * n_neg), n / (2.0 * n_pos)


def evaluate(probabilities: np.ndarray, labels: np.ndarray, criterion: str,
             threshold: float = 0.5, weights=None) -> float:
    """Held-out criterion value.

    tp_rate: share of positive rows predicted positive (ties at the
    threshold count as positive). classification_error: weighted 0-1 error.
    auc: pair-rank statistic with half credit for ties.
    """
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels, dtype=float) > 0
    if criterion == "tp_rate":
        if not np.any(y):
            raise CriterionUndefinedError("tp_rate undefined: no positive rows")
        return float(np.mean(p[y] >= threshold))
    if criterion == "auc":
        if not np.any(y) or np.all(y):
            raise CriterionUndefinedError("auc undefined: single-class test set")
        pos, neg = p[y], p[~y]
        greater = np.sum(pos[:, None] > neg[None, :])
        ties = np.sum(pos[:, None] == neg[None, :])
        return float((greater + 0.5 * ties) / (pos.size * neg.size))
    if criterion == "classification_error":
        pred = p >= threshold
        wrong = pred != y
        if weights is None:
            return float(np.mean(wrong))
        w = np.where(y, weights[1], weights[0])
        return float(np.sum(w * wrong) / np.sum(w))
    raise CriterionUndefinedError(f"unknown criterion {criterion!r}")


def _criterion_improves(criterion: str, new: float, old: float, min_gain: float) -> bool:
    if criterion == "classification_error":
        return new <= old - min_gain
    return new >= old + min_gain


def subset_design(design: DesignMatrix, features) -> DesignMatrix:
    """Column-restricted copy of a design (same rows, same responses)."""
    layout = design.layout
    keep = [0]
    names = layout.column_names()
    selected = set(features)
    new_z, new_x, new_y = [], [], []
    col = 1
    for n in layout.z_names:
        if n in selected:
            keep.append(col)
            new_z.append(n)
        col += 1
    for n in layout.x_names:
        if n in selected:
            keep.extend(range(col, col + layout.d))
            new_x.append(n)
        col += layout.d
    for n in layout.y_names:
        if n in selected:
            keep.extend(range(col, col + layout.d))
            new_y.append(n)
        col += layout.d
    assert col == len(names)
    from .model import ThetaLayout
    sub_layout = ThetaLayout(tuple(new_z), tuple(new_x), tuple(new_y), layout.d)
    return DesignMatrix(design.rows[:, keep], design.responses, sub_layout,
                        design.target, row_weights=design.row_weights)


def _split_rows(n_rows: int, split: float, seed: int):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    n_train = int(round(split * n_rows))
    n_train = min(max(n_train, 1), n_rows - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _fit_eval(full: DesignMatrix, features, train_idx, test_idx,
              cv: CvConfig, max_iter=None) -> tuple[float, NodeModel]:
    sub = subset_design(full, features)
    train = DesignMatrix(sub.rows[train_idx], sub.responses[train_idx],
                         sub.layout, sub.target)
    weights = None
    if cv.class_weighting:
        weights = class_weights(train.responses)
        row_w = np.where(train.responses > 0, weights[1], weights[0])
        train = DesignMatrix(train.rows, train.responses, train.layout,
                             train.target, row_weights=row_w)
    mu = np.zeros(train.N)
    sigma = np.ones(train.N)
    fit_train = train
    if cv.standardize:
        mu[1:] = train.rows[:, 1:].mean(axis=0)
        sd = train.rows[:, 1:].std(axis=0)
        sigma[1:] = np.where(sd > 1e-12, sd, 1.0)
        rows = train.rows.copy()
        rows[:, 1:] = (rows[:, 1:] - mu[1:]) / sigma[1:]
        fit_train = DesignMatrix(rows, train.responses, train.layout,
                                 train.target, row_weights=train.row_weights)
    feasible = build_feasible_set(fit_train, cv.link)
    res = solve_vi(fit_train, cv.link, feasible, tol=cv.solver_tol,
                   max_iter=max_iter if max_iter is not None else cv.solver_max_iter)
    theta = res.theta_hat.copy()
    if cv.standardize:
        raw = theta.copy()
        raw[1:] = theta[1:] / sigma[1:]
        raw[0] = theta[0] - np.sum(theta[1:] * mu[1:] / sigma[1:])
        theta = raw
    model = NodeModel(sub.target, sub.layout, cv.link, theta)
    probs = model.predict_rows(sub.rows[test_idx])
    value = evaluate(probs, sub.responses[test_idx], cv.criterion,
                     cv.decision_threshold, weights)
    return value, model


def default_initial_subset(design: DesignMatrix, candidates, k: int = 3):
    """Top-k candidates by |point-biserial correlation| between the
    candidate's lag-1 column and the response."""
    layout = design.layout
    names = layout.column_names()
    resp = design.responses
    scores = []
    for cand in candidates:
        col = None
        for j, cn in enumerate(names):
            if cn == f"z:{cand}" or cn == f"x:{cand}[t-1]" or cn == f"y:{cand}[t-1]":
                col = j
                break
        if col is None:
            scores.append((0.0, cand))
            continue
        x = design.rows[:, col]
        if np.std(x) < 1e-12 or np.std(resp) < 1e-12:
            scores.append((0.0, cand))
            continue
        r = np.corrcoef(x, resp)[0, 1]
        scores.append((abs(float(r)), cand))
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i][0], i))
    return tuple(candidates[i] for i in order[:k])


def forward_select(panels, target, candidates, cv: CvConfig,
                   initial_subset=None) -> SelectionTrace:
    """Greedy augmentation accepted only on held-out criterion improvement."""
    candidates = list(candidates)
    full = stack_designs(panels, target, cv.d, feature_subset=set(candidates))
    train_idx, test_idx = _split_rows(full.T, cv.split, cv.seed)
    if initial_subset is None:
        initial_subset = default_initial_subset(full, candidates)
    initial_subset = tuple(initial_subset)
    if not set(initial_subset) <= set(candidates):
        raise ValidationError("initial subset must be drawn from the candidates")
    selected = list(initial_subset)
    if selected:
        best_value, _ = _fit_eval(full, selected, train_idx, test_idx, cv)
    else:
        best_value = np.inf if cv.criterion == "classification_error" else -np.inf
    baseline = best_value
    steps: list[tuple[str, float]] = []
    remaining = [c for c in candidates if c not in selected]
    while remaining:
        round_best = None
        for idx, cand in enumerate(remaining):
            value, _ = _fit_eval(full, selected + [cand], train_idx, test_idx, cv)
            if round_best is None or _beats(cv.criterion, value, round_best[0]):
                round_best = (value, idx, cand)
        value, idx, cand = round_best
        if not _criterion_improves(cv.criterion, value, best_value, cv.min_gain):
            break
        selected.append(cand)
        steps.append((cand, value))
        best_value = value
        remaining.pop(idx)
    return SelectionTrace(cv.criterion, initial_subset, steps,
                          tuple(selected), baseline)


def _beats(criterion: str, new: float, old: float) -> bool:
    """Strictly better; ties keep the earlier (lower-index) candidate."""
    if criterion == "classification_error":
        return new < old
    return new > old


def tune_max_iter(panels, target, features, grid, cv: CvConfig) -> int:
    """Grid value maximizing the held-out criterion; ties pick the smallest
    value (earlier stopping)."""
    grid = sorted(set(int(g) for g in grid))
    if not grid:
        raise ValidationError("empty max_iter grid")
    full = stack_designs(panels, target, cv.d, feature_subset=set(features))
    train_idx, test_idx = _split_rows(full.T, cv.split, cv.seed)
    best = None
    for g in grid:       # ascending, so ties keep the smallest cap
        value, _ = _fit_eval(full, list(features), train_idx, test_idx, cv,
                             max_iter=g)
        if best is None or _beats(cv.criterion, value, best[0]):
            best = (value, g)
    return best[1]
