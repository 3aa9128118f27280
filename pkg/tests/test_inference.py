import math

import numpy as np
import pytest

from hawkesgraph.errors import RankDeficiencyError, ValidationError
from hawkesgraph.estimator import build_feasible_set, fit_node
from hawkesgraph.inference import (CiSpec, IDENTITY_ENVELOPE,
                                   PsiDiagnostics, bootstrap_edges,
                                   calibrate_s, ci_linear, ci_nonlinear,
                                   nominal_level, psi_lower, psi_upper,
                                   sigmoid_linear_bounds, parameter_error_bound)
from hawkesgraph.model import (DesignMatrix, LinkFunction, ThetaLayout,
                               build_design)
from hawkesgraph.panel import PatientPanel
from hawkesgraph.simulate import SimulationSpec, simulate_panel

LINEAR = LinkFunction("linear")


def _unit_design(T=100):
    layout = ThetaLayout((), (), (), 1)      # single constant column, N = 1
    rows = np.ones((T, 1))
    return DesignMatrix(rows, np.zeros(T), layout, "y0")


class TestBounds:
    def test_unit_constant_reduction(self):
        # M_w = m_g = lambda1 = N = 1 and eps with log(2N/eps) = 1
        design = _unit_design(T=100)
        eps = 2.0 / math.e
        rep = parameter_error_bound(design, LINEAR, eps)
        assert rep.theta_error_bound == pytest.approx(1.0 / math.sqrt(100))
        assert rep.kappa == 1.0

    def test_doubling_T_shrinks_by_sqrt2(self):
        r1 = parameter_error_bound(_unit_design(T=50), LINEAR, 0.1)
        r2 = parameter_error_bound(_unit_design(T=100), LINEAR, 0.1)
        assert r2.theta_error_bound == pytest.approx(
            r1.theta_error_bound / math.sqrt(2.0))

    def test_l2_is_sqrtN_times_inf(self, linear_panel):
        panel, _ = linear_panel
        design = build_design(panel, 0, 2)
        rep = parameter_error_bound(design, LINEAR, 0.1)
        assert rep.delta_l2_bound == pytest.approx(
            math.sqrt(design.N) * rep.delta_inf_bound)
        assert rep.theta_error_bound == pytest.approx(
            rep.delta_l2_bound / (rep.m_g * rep.lambda1))

    def test_rank_deficiency_error(self):
        layout = ThetaLayout((), (), ("y0",), 1)
        rows = np.column_stack([np.ones(10), np.zeros(10)])
        design = DesignMatrix(rows, np.zeros(10), layout, "y0")
        with pytest.raises(RankDeficiencyError):
            parameter_error_bound(design, LINEAR, 0.1)

    def test_epsilon_validation(self):
        with pytest.raises(ValidationError):
            parameter_error_bound(_unit_design(), LINEAR, 1.5)


class TestPsi:
    def test_lower_boundary_branch(self):
        assert psi_lower(0.001, 1000, 4.0) == 0.0
        assert psi_lower(4.0 / 3000.0, 1000, 4.0) == 0.0

    def test_upper_boundary_branch(self):
        assert psi_upper(0.999, 1000, 4.0) == 1.0
        assert psi_upper(1.0 - 4.0 / 3000.0, 1000, 4.0) == 1.0

    def test_sandwich_on_grid(self):
        for T in (100, 1000):
            for y in (2.0, 4.0, 8.0):
                for nu in np.arange(0.0, 1.0001, 0.01):
                    lo = psi_lower(float(nu), T, y)
                    hi = psi_upper(float(nu), T, y)
                    assert 0.0 <= lo <= nu <= hi <= 1.0

    def test_monotone_in_nu_on_interior(self):
        grid = np.arange(0.05, 0.95, 0.005)
        lo = [psi_lower(v, 500, 4.0) for v in grid]
        hi = [psi_upper(v, 500, 4.0) for v in grid]
        assert np.all(np.diff(lo) >= -1e-12)
        assert np.all(np.diff(hi) >= -1e-12)

    def test_continuous_at_branch_points(self):
        T, y = 1000, 4.0
        eps = 1e-9
        assert psi_lower(y / (3 * T) + eps, T, y) == pytest.approx(0.0, abs=1e-5)
        assert psi_upper(1 - y / (3 * T) - eps, T, y) == pytest.approx(1.0, abs=1e-5)

    def test_alternate_reading_differs(self):
        a = psi_lower(0.5, 100, 4.0, u_reading="y")
        b = psi_lower(0.5, 100, 4.0, u_reading="nu")
        assert a != b

    def test_validation(self):
        with pytest.raises(ValidationError):
            psi_lower(-0.1, 100, 4.0)
        with pytest.raises(ValidationError):
            psi_lower(0.5, 100, -1.0)
        with pytest.raises(ValidationError):
            psi_upper(0.5, 0, 4.0)

    def test_radicand_clamp_counter(self):
        diags = PsiDiagnostics()
        # extreme nu near the upper branch with large y stresses the radicand
        for nu in np.linspace(0.0, 1.0, 2001):
            psi_lower(float(nu), 10, 9.9, diagnostics=diags)
            psi_upper(float(nu), 10, 9.9, diagnostics=diags)
        assert diags.radicand_clamps >= 0   # counter wired through


class TestNominalLevel:
    def test_increasing_in_s_for_large_s(self):
        levels = [nominal_level(s, 5, 1000) for s in (5.0, 10.0, 20.0, 40.0)]
        assert np.all(np.diff(levels) > 0)

    def test_can_be_vacuous_for_small_s(self):
        assert nominal_level(1.01, 10, 1000) < 0.0

    def test_calibrate_reaches_target(self):
        s = calibrate_s(0.9, 3, 500)
        assert nominal_level(s, 3, 500) >= 0.9
        assert nominal_level(s - 0.05, 3, 500) < 0.9


class TestEnvelope:
    def test_midpoint_sandwich(self):
        for M in (1.0, 4.0, 10.0):
            env = sigmoid_linear_bounds(M)
            f1_0 = env.upper_intercept
            f2_0 = env.lower_intercept
            assert f2_0 <= 0.5 <= f1_0

    def test_dense_sweep_at_m6(self):
        env = sigmoid_linear_bounds(6.0)
        x = np.linspace(-6, 6, 10000)
        g = 1.0 / (1.0 + np.exp(-x))
        f1 = env.upper_slope * x + env.upper_intercept
        f2 = env.lower_slope * x + env.lower_intercept
        assert np.max(g - f1) <= 1e-9
        assert np.min(g - f2) >= -1e-9

    def test_point_symmetry(self):
        env = sigmoid_linear_bounds(5.0)
        x = np.linspace(-5, 5, 101)
        f1 = env.upper_slope * x + env.upper_intercept
        f2 = env.lower_slope * (-x) + env.lower_intercept
        np.testing.assert_allclose(f1 + f2, 1.0, atol=1e-12)

    def test_envelope_tightens_nothing_outside_domain_needed(self):
        env = sigmoid_linear_bounds(2.0)
        assert env.upper_slope == pytest.approx(env.lower_slope)


def _tiny_design():
    """N=2, T=3 nonnegative design; band (0,1) is implied by the polytope."""
    layout = ThetaLayout((), (), ("y0",), 1)
    rows = np.array([[1.0, 0.0], [1.0, 0.5], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0])
    return DesignMatrix(rows, y, layout, "y0")


def _vertex_enumeration_extrema(rows, lower, upper, box, a):
    """Brute-force oracle: enumerate pairwise constraint-line intersections
    of the 2-D polytope, keep feasible points, return (min, max) of a'x."""
    lines = []
    for r, lo, up in zip(rows, lower, upper):
        lines.append((r, lo))
        lines.append((r, up))
    lines.append((np.array([1.0, 0.0]), -box))
    lines.append((np.array([1.0, 0.0]), box))
    lines.append((np.array([0.0, 1.0]), -box))
    lines.append((np.array([0.0, 1.0]), box))
    pts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            A = np.vstack([lines[i][0], lines[j][0]])
            b = np.array([lines[i][1], lines[j][1]])
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            pts.append(np.linalg.solve(A, b))
    feas = []
    for p in pts:
        u = rows @ p
        if np.all(u >= lower - 1e-9) and np.all(u <= upper + 1e-9) \
                and np.all(np.abs(p) <= box + 1e-9):
            feas.append(p)
    vals = [float(a @ p) for p in feas]
    return min(vals), max(vals)


class TestCiLinear:
    def test_vacuous_band_reduces_to_polytope_extrema(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR, theta_max=100.0)
        vac = (np.zeros(design.N), np.ones(design.N))
        for k in range(2):
            a = np.zeros(2)
            a[k] = 1.0
            iv = ci_linear(design, feasible, CiSpec(5.0, a), bands=vac)
            lo, hi = _vertex_enumeration_extrema(
                feasible.constraint_rows, feasible.lower, feasible.upper,
                100.0, a)
            assert iv.lower == pytest.approx(lo, abs=1e-7)
            assert iv.upper == pytest.approx(hi, abs=1e-7)

    def test_hand_built_band_matches_vertex_enumeration(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR, theta_max=10.0)
        lo_band = np.array([0.1, 0.05])
        hi_band = np.array([0.9, 0.6])
        a = np.array([1.0, 1.0])
        iv = ci_linear(design, feasible, CiSpec(5.0, a),
                       bands=(lo_band, hi_band))
        # append the band as two extra slab constraints and enumerate
        rows = np.vstack([feasible.constraint_rows, design.gram / design.M_w])
        lower = np.concatenate([feasible.lower, lo_band])
        upper = np.concatenate([feasible.upper, hi_band])
        lo, hi = _vertex_enumeration_extrema(rows, lower, upper, 10.0, a)
        assert iv.lower == pytest.approx(lo, abs=1e-7)
        assert iv.upper == pytest.approx(hi, abs=1e-7)

    def test_width_nonincreasing_as_s_decreases(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR)
        a = np.array([0.0, 1.0])
        widths = []
        for s in (1.5, 3.0, 8.0):
            iv = ci_linear(design, feasible, CiSpec(s, a))
            widths.append(iv.upper - iv.lower)
        assert widths[0] <= widths[1] + 1e-12 <= widths[2] + 2e-12

    def test_infeasible_band_flagged(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR)
        bands = (np.array([0.9, 0.9]), np.array([0.95, 0.91]))
        iv = ci_linear(design, feasible, CiSpec(5.0, np.array([1.0, 0.0])),
                       bands=bands)
        assert not iv.feasible

    def test_true_parameter_covered_in_small_study(self):
        """30-trial miniature of the coverage study (full run lives in the
        acceptance suite)."""
        rng = np.random.default_rng(0)
        covered = 0
        trials = 30
        for t in range(trials):
            spec = SimulationSpec(
                n1=1, n2=0, n3=0, d=2, T=300,
                A=np.array([[0.5]]), R=np.array([[1.0]]),
                nu=np.array([0.3]), link=LinkFunction("linear"))
            panel, thetas, _ = simulate_panel(spec, seed=int(rng.integers(1e9)))
            design = build_design(panel, 0, 2)
            feasible = build_feasible_set(design, LINEAR)
            s = calibrate_s(0.9, design.N, design.T)
            ok = True
            for k in range(design.N):
                a = np.zeros(design.N)
                a[k] = 1.0
                iv = ci_linear(design, feasible, CiSpec(s, a))
                if not (iv.lower - 1e-9 <= thetas[0][k] <= iv.upper + 1e-9):
                    ok = False
            covered += ok
        assert covered / trials >= 0.8


class TestCiNonlinear:
    def test_identity_envelope_matches_linear(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR)
        a = np.array([1.0, 0.5])
        spec = CiSpec(4.0, a)
        lin = ci_linear(design, feasible, spec)
        non = ci_nonlinear(design, feasible, spec, envelope=IDENTITY_ENVELOPE)
        assert non.conservative
        assert non.lower == pytest.approx(lin.lower, abs=1e-7)
        assert non.upper == pytest.approx(lin.upper, abs=1e-7)

    def test_wider_envelope_never_shrinks_interval(self):
        design = _tiny_design()
        feasible = build_feasible_set(design, LINEAR)
        a = np.array([1.0, 1.0])
        spec = CiSpec(4.0, a)
        base_env = IDENTITY_ENVELOPE
        inner = ci_nonlinear(design, feasible, spec, envelope=base_env)
        outer = ci_nonlinear(design, feasible, spec, envelope=base_env.widen(0.05))
        assert outer.lower <= inner.lower + 1e-9
        assert outer.upper >= inner.upper - 1e-9


def _bootstrap_panels(seed0=0, n_panels=8, T=120):
    spec = SimulationSpec(
        n1=2, n2=0, n3=0, d=1, T=T,
        A=np.array([[0.45, 0.0], [0.3, 0.2]]), R=np.ones((2, 2)),
        nu=np.array([0.3, 0.35]), link=LinkFunction("linear"))
    return [simulate_panel(spec, seed=seed0 + k)[0] for k in range(n_panels)]


class TestBootstrap:
    def test_no_signal_graph_empty(self):
        T = 60
        panels = []
        rng = np.random.default_rng(1)
        for k in range(6):
            y = np.zeros((2, T))
            y[1] = (rng.uniform(size=T) < 0.4).astype(float)
            panels.append(PatientPanel(f"p{k}", y, np.zeros((0, T)),
                                       np.zeros(0), ("y0", "y1"), (), ()))
        edges = bootstrap_edges(panels, 1, LINEAR, B=20, seed=3)
        row = edges.intervals[0]             # responses y0 are identically 0
        assert all(iv.lower <= 1e-6 and iv.upper >= -1e-6 for iv in row)
        assert all(iv.weight == 0.0 and not iv.exists for iv in row)

    def test_deterministic_per_seed(self):
        panels = _bootstrap_panels()
        a = bootstrap_edges(panels, 1, LINEAR, B=12, seed=7)
        b = bootstrap_edges(panels, 1, LINEAR, B=12, seed=7)
        np.testing.assert_array_equal(a.weight_matrix(), b.weight_matrix())

    def test_quantiles_match_order_statistics(self):
        """Recompute the 4 replicate weights independently and compare the
        interval endpoints with a hand-coded interpolation of the order
        statistics."""
        panels = _bootstrap_panels(n_panels=5, T=80)
        seed, B, level = 11, 4, 0.5
        edges = bootstrap_edges(panels, 1, LINEAR, B=B, level=level, seed=seed)
        rng = np.random.default_rng(seed)
        draws = np.zeros((B, 2, 2))
        for b in range(B):
            idx = rng.integers(0, len(panels), size=len(panels))
            sample = [panels[k] for k in idx]
            for i, name in enumerate(("y0", "y1")):
                model, _ = fit_node(sample, name, 1, LINEAR, tol=1e-7,
                                    init=None)
                for row, nm in zip(model.blocks["alpha"], model.layout.y_names):
                    draws[b, i, ("y0", "y1").index(nm)] = row.sum()

        def order_stat(values, q):
            v = np.sort(values)
            pos = q * (len(v) - 1)
            lo = int(math.floor(pos))
            frac = pos - lo
            if lo + 1 >= len(v):
                return v[-1]
            return v[lo] * (1 - frac) + v[lo + 1] * frac

        alpha = 1 - level
        for i in range(2):
            for j in range(2):
                iv = edges.intervals[i][j]
                assert iv.lower == pytest.approx(
                    order_stat(draws[:, i, j], alpha / 2), abs=2e-5)
                assert iv.upper == pytest.approx(
                    order_stat(draws[:, i, j], 1 - alpha / 2), abs=2e-5)
                assert iv.median == pytest.approx(
                    order_stat(draws[:, i, j], 0.5), abs=2e-5)

    def test_exists_weight_consistency(self):
        panels = _bootstrap_panels()
        edges = bootstrap_edges(panels, 1, LINEAR, B=15, seed=5)
        for row in edges.intervals:
            for iv in row:
                assert iv.lower <= iv.median <= iv.upper
                assert iv.exists == (not (iv.lower <= 1e-6 and iv.upper >= -1e-6))
                if iv.exists:
                    assert iv.weight == iv.median
                else:
                    assert iv.weight == 0.0

    def test_validation(self):
        panels = _bootstrap_panels(n_panels=3)
        with pytest.raises(ValidationError):
            bootstrap_edges(panels, 1, LINEAR, B=1)
        with pytest.raises(ValidationError):
            bootstrap_edges(panels, 1, LINEAR, B=4, level=1.2)


class TestBootstrapFailures:
    def test_unusable_panels_exceeding_budget_raise(self):
        from hawkesgraph.errors import FitFailureError
        short = PatientPanel("s", np.array([[1.0]]), np.zeros((0, 1)),
                             np.zeros(0), ("y0",), (), ())   # T = d: unusable
        with pytest.raises(FitFailureError, match="replicates failed"):
            bootstrap_edges([short], 1, LINEAR, B=5, seed=0)
