import numpy as np
import pytest

from hawkesgraph.errors import CriterionUndefinedError, ValidationError
from hawkesgraph.model import LinkFunction, stack_designs
from hawkesgraph.selection import (CvConfig, class_weights, default_initial_subset,
                                   evaluate, forward_select, subset_design,
                                   tune_max_iter)
from hawkesgraph.simulate import SimulationSpec, simulate_panel

LINEAR = LinkFunction("linear")


class TestEvaluate:
    def test_perfect_separator(self):
        p = np.array([0.9, 0.8, 0.1, 0.2])
        y = np.array([1, 1, 0, 0])
        assert evaluate(p, y, "tp_rate") == 1.0
        assert evaluate(p, y, "classification_error") == 0.0
        assert evaluate(p, y, "auc") == 1.0

    def test_tie_convention_at_threshold(self):
        p = np.full(6, 0.5)
        y = np.array([1, 0, 1, 0, 1, 0])
        # ties at the threshold predict positive
        assert evaluate(p, y, "tp_rate", threshold=0.5) == 1.0
        assert evaluate(p, y, "auc") == 0.5

    def test_four_row_hand_example(self):
        p = np.array([0.9, 0.6, 0.4, 0.2])
        y = np.array([1, 0, 1, 0])
        assert evaluate(p, y, "tp_rate") == 0.5
        assert evaluate(p, y, "auc") == 0.75

    def test_tp_rate_equals_one_minus_fnr(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(size=50)
        y = (rng.uniform(size=50) < 0.4).astype(float)
        tp = evaluate(p, y, "tp_rate", threshold=0.5)
        fn = np.sum((p < 0.5) & (y > 0))
        assert tp == pytest.approx(1.0 - fn / np.sum(y > 0))

    def test_weighted_error(self):
        p = np.array([0.9, 0.1, 0.1])
        y = np.array([1, 1, 0])            # one false negative
        w = class_weights(y)
        err = evaluate(p, y, "classification_error", weights=w)
        # weighted: miss one positive with weight w_pos among total mass
        expected = w[1] / (2 * w[1] + w[0])
        assert err == pytest.approx(expected)

    def test_degenerate_test_set_names_criterion(self):
        with pytest.raises(CriterionUndefinedError, match="tp_rate"):
            evaluate(np.array([0.5]), np.array([0.0]), "tp_rate")
        with pytest.raises(CriterionUndefinedError, match="auc"):
            evaluate(np.array([0.5]), np.array([1.0]), "auc")


class TestClassWeights:
    def test_imbalanced_cohort_weights(self):
        labels = np.concatenate([np.ones(450), np.zeros(4772)])
        w_neg, w_pos = class_weights(labels)
        assert w_pos == pytest.approx(5222 / 900, abs=1e-9)
        assert w_pos == pytest.approx(5.802, abs=1e-3)
        assert w_neg == pytest.approx(5222 / 9544, abs=1e-9)
        assert w_neg == pytest.approx(0.547, abs=1e-3)

    def test_balanced_labels_unit_weights(self):
        labels = np.array([0, 1, 0, 1])
        assert class_weights(labels) == (1.0, 1.0)

    def test_weighted_masses_equal(self):
        rng = np.random.default_rng(1)
        labels = (rng.uniform(size=97) < 0.23).astype(float)
        w_neg, w_pos = class_weights(labels)
        assert w_pos * labels.sum() == pytest.approx(
            w_neg * (labels.size - labels.sum()))

    def test_single_class_errors(self):
        with pytest.raises(ValidationError):
            class_weights(np.zeros(5))


def _selection_panels(n_panels=4, T=260, seed0=20):
    """y0 driven by x2 and x5 only; x0..x7 present as candidates."""
    B = np.zeros((1, 8))
    B[0, 2] = 0.35
    B[0, 5] = -0.3
    spec = SimulationSpec(
        n1=1, n2=8, n3=0, d=1, T=T,
        A=np.array([[0.3]]), R=np.array([[1.0]]),
        B=B, Rtilde=np.ones((1, 8)),
        nu=np.array([0.45]), link=LinkFunction("linear"),
        ar_coeff=0.3, ar_noise=0.5, clip=1.0)
    return [simulate_panel(spec, seed=seed0 + k)[0] for k in range(n_panels)]


class TestSubsetDesign:
    def test_columns_match_rebuilt_design(self):
        panels = _selection_panels(1)
        full = stack_designs(panels, "y0", 1)
        sub = subset_design(full, {"x2", "x5", "y0"})
        rebuilt = stack_designs(panels, "y0", 1, feature_subset={"x2", "x5", "y0"})
        np.testing.assert_allclose(sub.rows, rebuilt.rows)
        assert sub.layout.x_names == rebuilt.layout.x_names


class TestForwardSelect:
    def _cv(self, **kw):
        base = dict(criterion="auc", split=0.75, class_weighting=False,
                    d=1, link=LINEAR, min_gain=1e-4, seed=3,
                    solver_tol=1e-8, solver_max_iter=30000)
        base.update(kw)
        return CvConfig(**base)

    def test_single_improving_candidate(self):
        panels = _selection_panels()
        trace = forward_select(panels, "y0", ["x2"], self._cv(),
                               initial_subset=())
        assert len(trace.steps) == 1
        assert trace.final_subset == ("x2",)

    def test_empty_candidates_trace(self):
        panels = _selection_panels()
        trace = forward_select(panels, "y0", [], self._cv(), initial_subset=())
        assert trace.steps == []
        assert trace.final_subset == ()

    def test_criterion_sequence_strictly_improves(self):
        panels = _selection_panels()
        candidates = [f"x{k}" for k in range(8)] + ["y0"]
        trace = forward_select(panels, "y0", candidates, self._cv(),
                               initial_subset=())
        values = [v for _, v in trace.steps]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_final_subset_is_initial_plus_steps(self):
        panels = _selection_panels()
        candidates = [f"x{k}" for k in range(8)]
        trace = forward_select(panels, "y0", candidates, self._cv(),
                               initial_subset=("x0",))
        assert set(trace.final_subset) == {"x0"} | {f for f, _ in trace.steps}
        assert trace.final_subset[:1] == ("x0",)

    def test_signal_features_found(self):
        panels = _selection_panels(n_panels=6, T=300)
        candidates = [f"x{k}" for k in range(8)]
        trace = forward_select(panels, "y0", candidates, self._cv(),
                               initial_subset=())
        assert {"x2", "x5"} <= set(trace.final_subset)

    def test_deterministic(self):
        panels = _selection_panels()
        candidates = [f"x{k}" for k in range(8)]
        t1 = forward_select(panels, "y0", candidates, self._cv())
        t2 = forward_select(panels, "y0", candidates, self._cv())
        assert t1.final_subset == t2.final_subset
        assert t1.steps == t2.steps

    def test_default_initial_subset_ranks_by_correlation(self):
        panels = _selection_panels(n_panels=6, T=300)
        full = stack_designs(panels, "y0", 1,
                             feature_subset={f"x{k}" for k in range(8)})
        init = default_initial_subset(full, [f"x{k}" for k in range(8)], k=2)
        assert "x2" in init or "x5" in init


class TestTuneMaxIter:
    def test_singleton_grid(self):
        panels = _selection_panels()
        cv = CvConfig(criterion="auc", d=1, link=LINEAR,
                      class_weighting=False, seed=1)
        assert tune_max_iter(panels, "y0", ["x2"], [10], cv) == 10

    def test_deterministic_choice(self):
        panels = _selection_panels()
        cv = CvConfig(criterion="auc", d=1, link=LINEAR,
                      class_weighting=False, seed=1)
        a = tune_max_iter(panels, "y0", ["x2", "x5"], [5, 500], cv)
        b = tune_max_iter(panels, "y0", ["x2", "x5"], [5, 500], cv)
        assert a == b and a in (5, 500)

    def test_empty_grid_rejected(self):
        panels = _selection_panels(1)
        cv = CvConfig(d=1, link=LINEAR, class_weighting=False)
        with pytest.raises(ValidationError):
            tune_max_iter(panels, "y0", ["x2"], [], cv)


class TestCvConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            CvConfig(split=1.2)
        with pytest.raises(ValidationError):
            CvConfig(decision_threshold=0.0)
        with pytest.raises(ValidationError):
            CvConfig(criterion="f1")


class TestCandidateOrderInvariance:
    def test_selection_invariant_to_candidate_order(self):
        panels = _selection_panels(n_panels=5, T=280)
        cv = CvConfig(criterion="auc", split=0.7, class_weighting=False,
                      d=1, link=LINEAR, min_gain=4e-3, seed=2,
                      solver_tol=1e-8)
        forward = [f"x{k}" for k in range(8)]
        backward = forward[::-1]
        t1 = forward_select(panels, "y0", forward, cv, initial_subset=())
        t2 = forward_select(panels, "y0", backward, cv, initial_subset=())
        assert set(t1.final_subset) == set(t2.final_subset)


class TestTuneAccounting:
    def test_one_fit_per_grid_value(self, monkeypatch):
        import hawkesgraph.selection as sel
        panels = _selection_panels(1)
        cv = CvConfig(criterion="auc", d=1, link=LINEAR,
                      class_weighting=False, seed=0)
        calls = []
        original = sel._fit_eval

        def counting(*args, **kwargs):
            calls.append(kwargs.get("max_iter"))
            return original(*args, **kwargs)

        monkeypatch.setattr(sel, "_fit_eval", counting)
        sel.tune_max_iter(panels, "y0", ["x2"], [5, 50, 500], cv)
        assert calls == [5, 50, 500]
