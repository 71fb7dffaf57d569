from math import comb

import numpy as np
import pytest

from deepgcn.graph import laplacian_operator, load_graph, renormalized_operator
from deepgcn.spectral import (BoundViolationError, DisconnectedGraphError, FilterSpec,
                              check_cheeger_bound, check_convergence_bound,
                              estimate_spectral_gap, lazy_walk_propagate,
                              linear_gcnii_filter, poly_filter_oracle,
                              random_connected_graph, recover_gamma, spectral_gap,
                              stationary_vector, verify_filter_expressivity)

from conftest import dense_renormalized

TRIANGLE = [(0, 1), (1, 2), (2, 0)]


class TestLazyWalk:
    def test_all_ones_fixed_on_regular_graph(self):
        g = load_graph(TRIANGLE, 3)
        iters = lazy_walk_propagate(renormalized_operator(g), np.ones(3), 8)
        assert np.abs(iters - 1.0).max() <= 1e-14

    def test_single_edge_one_step(self):
        g = load_graph([(0, 1)], 2)
        iters = lazy_walk_propagate(renormalized_operator(g), np.array([1.0, 0.0]), 1)
        assert np.allclose(iters[1], [0.75, 0.25])

    def test_matches_dense_power_oracle(self):
        rng = np.random.default_rng(0)
        g = random_connected_graph(rng, 9)
        x = rng.standard_normal(9)
        iters = lazy_walk_propagate(renormalized_operator(g), x, 20)
        walk = 0.5 * (np.eye(9) + dense_renormalized(g))
        expect = x.copy()
        for k in range(21):
            assert np.abs(iters[k] - expect).max() <= 1e-12
            expect = walk @ expect


class TestStationaryVector:
    def test_single_edge_symmetry(self):
        g = load_graph([(0, 1)], 2)
        assert np.allclose(stationary_vector(g, np.array([1.0, 0.0])), [0.5, 0.5])

    def test_triangle_all_ones_fixed_point(self):
        g = load_graph(TRIANGLE, 3)
        assert np.allclose(stationary_vector(g, np.ones(3)), np.ones(3))

    def test_long_horizon_propagation_agrees(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            g = random_connected_graph(rng, int(rng.integers(4, 13)))
            x = rng.random(g.num_nodes)
            pi = stationary_vector(g, x)
            h = lazy_walk_propagate(renormalized_operator(g), x, 500)[-1]
            assert np.abs(h - pi).max() <= 1e-8

    def test_disconnected_rejected(self):
        g = load_graph([(0, 1)], 3)
        with pytest.raises(DisconnectedGraphError):
            stationary_vector(g, np.ones(3))


class TestSpectralGap:
    def test_single_edge(self):
        assert spectral_gap(laplacian_operator(load_graph([(0, 1)], 2))) \
            == pytest.approx(1.0, abs=1e-12)

    def test_triangle(self):
        assert spectral_gap(laplacian_operator(load_graph(TRIANGLE, 3))) \
            == pytest.approx(1.0, abs=1e-12)

    def test_matches_independent_dense_eigensolver(self):
        rng = np.random.default_rng(2)
        g = random_connected_graph(rng, 20)
        got = spectral_gap(laplacian_operator(g))
        lap = np.eye(20) - dense_renormalized(g)
        eigs = np.sort(np.linalg.eigvalsh(lap))
        expect = eigs[eigs > 1e-9][0]
        assert got == pytest.approx(expect, abs=1e-10)

    def test_empty_operator_rejected(self):
        with pytest.raises(ValueError):
            spectral_gap(laplacian_operator(load_graph([], 3)))

    def test_power_iteration_estimate(self):
        rng = np.random.default_rng(3)
        g = random_connected_graph(rng, 40, extra_edge_prob=0.1)
        lap = laplacian_operator(g)
        assert estimate_spectral_gap(lap) == pytest.approx(spectral_gap(lap), abs=1e-6)


class TestConvergenceBound:
    def test_single_edge_hand_computed(self):
        # Gap is 1, so the envelope is sum(x) * 0.5^k; the step-1 iterate of
        # (1, 0) is (0.75, 0.25) and the stationary vector (0.5, 0.5).
        g = load_graph([(0, 1)], 2)
        report = check_convergence_bound(g, np.array([1.0, 0.0]), 5)
        assert report.spectral_gap == pytest.approx(1.0)
        assert report.per_step_deviation[1] == pytest.approx(0.25)
        assert report.bound_curve[1] == pytest.approx(0.5)
        assert (report.per_step_deviation <= report.bound_curve).all()

    def test_star_graph_long_run(self):
        star = load_graph([(0, v) for v in range(1, 6)], 6)
        rng = np.random.default_rng(4)
        report = check_convergence_bound(star, rng.random(6), 50)
        assert report.per_step_deviation.shape == (51,)
        assert report.relative_check_passed

    def test_zero_signal_zero_deviation(self):
        g = load_graph(TRIANGLE, 3)
        report = check_convergence_bound(g, np.zeros(3), 10)
        assert (report.per_step_deviation == 0.0).all()

    def test_negative_signal_rejected(self):
        g = load_graph(TRIANGLE, 3)
        with pytest.raises(ValueError):
            check_convergence_bound(g, np.array([1.0, -1.0, 0.0]), 4)

    def test_deviation_monotone_nonincreasing(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g = random_connected_graph(rng, int(rng.integers(3, 14)))
            report = check_convergence_bound(g, rng.random(g.num_nodes), 40)
            steps = report.per_step_deviation
            assert (steps[1:] <= steps[:-1] + 1e-12).all()

    def test_random_graph_sweep_no_violations(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            g = random_connected_graph(rng, int(rng.integers(3, 16)))
            check_convergence_bound(g, rng.random(g.num_nodes), 64)

    def test_large_graphs_fall_back_to_estimated_gap(self, monkeypatch):
        import deepgcn.spectral as spectral_mod
        monkeypatch.setattr(spectral_mod, "DENSE_EIG_CAP", 30)
        rng = np.random.default_rng(7)
        g = random_connected_graph(rng, 40, extra_edge_prob=0.2)
        report = check_convergence_bound(g, rng.random(40), 32)
        assert report.gap_method == "power_iteration"
        lap = np.eye(40) - dense_renormalized(g)
        eigs = np.sort(np.linalg.eigvalsh(lap))
        assert report.spectral_gap == pytest.approx(eigs[eigs > 1e-9][0], abs=1e-6)


class TestCheegerBound:
    def test_single_edge_closed_form(self):
        # Transition distribution from either node is (0.5 + 0.5^(k+1),
        # 0.5 - 0.5^(k+1)); the envelope at gap 1 is 0.5^k.
        g = load_graph([(0, 1)], 2)
        report = check_cheeger_bound(g, 12)
        assert report.passed
        walk = np.array([[0.75, 0.25], [0.25, 0.75]])
        probs = np.eye(2)
        for k in range(13):
            dev = np.abs(probs[0, 0] - 0.5)
            assert dev == pytest.approx(0.5 ** (k + 1), abs=1e-14)
            assert dev <= 0.5 ** k
            probs = walk @ probs

    def test_triangle_and_random_graphs(self):
        assert check_cheeger_bound(load_graph(TRIANGLE, 3), 30).passed
        rng = np.random.default_rng(7)
        for _ in range(10):
            g = random_connected_graph(rng, int(rng.integers(3, 13)))
            assert check_cheeger_bound(g, 64).passed

    def test_disconnected_rejected(self):
        with pytest.raises(DisconnectedGraphError):
            check_cheeger_bound(load_graph([(0, 1)], 3), 4)


class TestGammaRecovery:
    def test_single_coefficient_passthrough(self):
        spec = recover_gamma(FilterSpec(1, np.array([2.5])))
        assert spec.gamma.tolist() == [2.5]
        assert not spec.degenerate

    def test_order_two_hand_solved(self):
        # theta = (1, 0): gains (0, 1) reproduce the pure identity filter.
        spec = recover_gamma(FilterSpec(2, np.array([1.0, 0.0])))
        assert np.allclose(spec.gamma, [0.0, 1.0])
        assert not spec.degenerate

    def test_partial_products_reproduce_sums(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            k = int(rng.integers(2, 7))
            theta = rng.uniform(-1, 1, size=k)
            spec = recover_gamma(FilterSpec(k, theta))
            if spec.degenerate:
                continue
            for l in range(k):
                target = sum(theta[j] * (-1) ** l * comb(j, l) for j in range(l, k))
                partial = np.prod(spec.gamma[k - l - 1:])
                assert partial == pytest.approx(target, rel=1e-10, abs=1e-12)

    def test_degenerate_denominator_flagged(self):
        # theta = (1, 0, 0): the second ratio is 0/0; flagged, not fatal.
        spec = recover_gamma(FilterSpec(3, np.array([1.0, 0.0, 0.0])))
        assert spec.degenerate
        assert spec.degenerate_flags[0]


class TestLinearFilter:
    def test_zero_gains_zero_output(self):
        g = load_graph(TRIANGLE, 3)
        out = linear_gcnii_filter(renormalized_operator(g), np.ones(3), np.zeros(4))
        assert (out == 0.0).all()

    def test_single_step_scales_signal(self):
        # One step from the zero state propagates nothing: the output is the
        # gain times the raw signal, matching the order-1 solve gamma = theta0.
        rng = np.random.default_rng(9)
        g = random_connected_graph(rng, 6)
        x = rng.random(6)
        out = linear_gcnii_filter(renormalized_operator(g), x, np.array([1.7]))
        assert np.abs(out - 1.7 * x).max() <= 1e-15

    def test_matches_explicit_polynomial_sum(self):
        rng = np.random.default_rng(10)
        g = random_connected_graph(rng, 8)
        x = rng.random(8)
        gamma = rng.uniform(-1, 1, size=5)
        got = linear_gcnii_filter(renormalized_operator(g), x, gamma)
        pd = dense_renormalized(g)
        expect = np.zeros(8)
        power = x.copy()
        for l in range(5):
            expect += np.prod(gamma[5 - l - 1:]) * power
            power = pd @ power
        assert np.abs(got - expect).max() <= 1e-10


class TestPolyFilterOracle:
    def test_constant_filter(self):
        g = load_graph(TRIANGLE, 3)
        x = np.array([1.0, 2.0, 3.0])
        assert (poly_filter_oracle(laplacian_operator(g), x, np.array([1.0])) == x).all()

    def test_pure_laplacian(self):
        rng = np.random.default_rng(11)
        g = random_connected_graph(rng, 7)
        x = rng.random(7)
        got = poly_filter_oracle(laplacian_operator(g), x, np.array([0.0, 1.0]))
        lap = np.eye(7) - dense_renormalized(g)
        assert np.abs(got - lap @ x).max() <= 1e-13

    def test_against_naive_summation(self):
        rng = np.random.default_rng(12)
        g = random_connected_graph(rng, 9)
        x = rng.random(9)
        theta = rng.uniform(-1, 1, size=6)
        got = poly_filter_oracle(laplacian_operator(g), x, theta)
        lap = np.eye(9) - dense_renormalized(g)
        expect = np.zeros(9)
        for l, coeff in enumerate(theta):
            expect += coeff * (np.linalg.matrix_power(lap, l) @ x)
        assert np.abs(got - expect).max() <= 1e-12


class TestFilterExpressivity:
    def test_identity_filter_any_order(self):
        rng = np.random.default_rng(13)
        g = random_connected_graph(rng, 10)
        x = rng.random(10)
        for k in (1, 2, 3, 5, 8):
            theta = np.zeros(k)
            theta[0] = 1.0
            check = verify_filter_expressivity(g, x, theta)
            assert check.max_abs_error <= 1e-8

    def test_restart_walk_coefficient_family(self):
        # Geometric restart coefficients alpha (1 - alpha)^i over powers of the
        # propagation matrix, re-expressed in the Laplacian basis.
        alpha, k = 0.1, 8
        theta_p = alpha * (1 - alpha) ** np.arange(k)
        theta = np.array([
            sum(theta_p[i] * (-1) ** l * comb(i, l) for i in range(l, k))
            for l in range(k)
        ])
        rng = np.random.default_rng(14)
        g = random_connected_graph(rng, 12)
        x = rng.random(12)
        check = verify_filter_expressivity(g, x, theta)
        assert not check.degenerate
        assert check.passed

        # The recovered recursion must also equal the restart-walk sum itself.
        pd = dense_renormalized(g)
        expect = np.zeros(12)
        power = x.copy()
        for i in range(k):
            expect += theta_p[i] * power
            power = pd @ power
        got = linear_gcnii_filter(renormalized_operator(g), x, check.gamma)
        assert np.abs(got - expect).max() <= 1e-8

    def test_random_trials_all_pass(self):
        rng = np.random.default_rng(15)
        done = 0
        while done < 20:
            g = random_connected_graph(rng, int(rng.integers(4, 16)))
            theta = rng.uniform(-1, 1, size=int(rng.integers(1, 9)))
            check = verify_filter_expressivity(g, rng.random(g.num_nodes), theta)
            if check.degenerate:
                continue
            assert check.passed, check.max_abs_error
            done += 1
