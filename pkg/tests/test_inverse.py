import numpy as np
import pytest

from qilp import (
    Dataset,
    InverseInfeasibleError,
    MqioOptions,
    QioConfig,
    build_mqio,
    check_inverse_feasible,
    compute_big_m,
    facet_distance_matrix,
    feasible_facets,
    min_tau,
    quantile_count,
    shift_count,
    solution_from_facets,
    solve_mip,
    solve_mqio,
    solve_previous_model,
)
from qilp.inverse import certify_solution


def test_quantile_counts_use_exact_arithmetic():
    assert quantile_count(0.8, 5) == 4
    assert quantile_count(1.0, 7) == 7
    assert quantile_count(0.75, 4) == 3
    assert quantile_count(0.5, 5) == 3
    # 0.7*10 is 6.999... in floats; the exact value is 7
    assert quantile_count(0.7, 10) == 7
    assert shift_count(0.8, 5) == 2
    assert shift_count(1.0, 4) == 1
    assert shift_count(0.75, 4) == 2


class TestBigM:
    def test_distance_bound_golden(self, box_instance, outlier_data):
        bm = compute_big_m(box_instance, outlier_data, 1.0)
        assert bm.M2[4] == pytest.approx(2.2)
        assert np.all(bm.M1 > 0) and np.all(np.isfinite(bm.M1))

    def test_center_of_box_reaches_half_width(self, box_instance):
        bm = compute_big_m(box_instance, Dataset([[1.25, 1.25]]), 0.0)
        assert bm.M2[0] == pytest.approx(1.25)

    def test_m1_dominates_row_slack_everywhere(self, box_instance, outlier_data):
        # M1[i,k] must bound a_i.x - b_i over the whole box for every point
        corners = np.array([[0, 0], [2.5, 0], [0, 2.5], [2.5, 2.5]])
        bm = compute_big_m(box_instance, outlier_data, 1.0)
        for i in range(4):
            worst = max(box_instance.A[i] @ c - box_instance.b[i] for c in corners)
            assert np.all(bm.M1[i] >= worst - 1e-9)


def test_feasible_facets_matches_paper(box_instance, example1_data):
    cfg = QioConfig(tau=0.3, theta=0.5)
    facets, covered = feasible_facets(box_instance, example1_data, cfg)
    assert facets == (0, 1)
    assert covered[0] == frozenset({0, 1}) and covered[1] == frozenset({1, 2})


def test_feasible_facets_degenerate_thresholds(box_instance, example1_data):
    on_edge = Dataset(np.array([[1.0, 2.5], [2.0, 2.5]]))
    facets, _ = feasible_facets(box_instance, on_edge, QioConfig(tau=0.0, theta=1.0))
    assert 0 in facets
    all_f, _ = feasible_facets(
        box_instance, example1_data, QioConfig(tau=50.0, theta=1.0)
    )
    assert all_f == (0, 1, 2, 3)


def test_min_tau_matches_paper(box_instance, example1_data):
    res = min_tau(box_instance, example1_data, 0.5)
    assert res.tau_star == pytest.approx(0.2, abs=1e-6)
    assert res.facet == 0
    assert res.per_facet == pytest.approx([0.2, 0.3, 2.0, 2.0], abs=1e-6)


def test_min_tau_zero_on_exact_facet_data(box_instance):
    data = Dataset(np.array([[0.5, 2.5], [1.5, 2.5]]))
    res = min_tau(box_instance, data, 1.0)
    assert res.tau_star == pytest.approx(0.0, abs=1e-9)
    assert res.facet == 0


class TestPreviousModel:
    def test_original_points(self, box_instance, example1_data):
        res = solve_previous_model(box_instance, example1_data)
        assert res.facet == 0
        assert res.objective == pytest.approx(1.4, abs=1e-6)
        assert np.allclose(res.cost, [0.0, -1.0])

    def test_shifted_points_switch_facets(self, box_instance, example1_shifted):
        res = solve_previous_model(box_instance, example1_shifted)
        assert res.facet == 1
        assert res.objective == pytest.approx(1.4, abs=1e-6)
        assert res.per_facet_objectives[0] == pytest.approx(1.6, abs=1e-6)

    def test_outlier_drags_the_fit(self, box_instance, outlier_data):
        res = solve_previous_model(box_instance, outlier_data)
        assert res.facet == 1
        assert res.objective == pytest.approx(1.9, abs=1e-6)
        assert res.per_facet_objectives[0] == pytest.approx(3.6, abs=1e-6)


class TestSelectionMip:
    def test_running_example_solution(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8, normalization_p=1.0)
        sol = solve_mqio(box_instance, outlier_data, cfg)
        assert sol.objective == 2
        assert sol.selected_facets == (0, 1)
        assert sol.selected_points == (0, 1, 2, 3)
        assert sol.representative_c == pytest.approx([-0.5, -0.5], abs=1e-6)
        assert sol.dual_certificate == pytest.approx([0.5, 0.5, 0.0, 0.0], abs=1e-6)

    def test_single_point_on_vertex(self, box_instance):
        data = Dataset(np.array([[2.5, 2.5]]))
        sol = solve_mqio(box_instance, data, QioConfig(tau=0.0, theta=1.0))
        assert sol.objective == 2 and sol.selected_facets == (0, 1)

    def test_infeasible_suggests_min_tau(self, box_instance, example1_data):
        with pytest.raises(InverseInfeasibleError) as err:
            solve_mqio(box_instance, example1_data, QioConfig(tau=0.05, theta=1.0))
        assert err.value.min_tau == pytest.approx(0.5, abs=1e-6)

    def test_tau_below_min_tau_frontier_infeasible(self, box_instance, example1_data):
        frontier = min_tau(box_instance, example1_data, 1.0).tau_star
        with pytest.raises(InverseInfeasibleError):
            solve_mqio(
                box_instance, example1_data,
                QioConfig(tau=frontier - 0.01, theta=1.0),
            )
        sol = solve_mqio(
            box_instance, example1_data, QioConfig(tau=frontier + 0.01, theta=1.0)
        )
        assert sol.objective >= 1

    def test_pinned_selection_count_keeps_optimum(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8)
        free = solve_mqio(box_instance, outlier_data, cfg)
        pinned = solve_mqio(
            box_instance, outlier_data, cfg, MqioOptions(pin_selection_count=True)
        )
        assert pinned.objective == free.objective
        assert len(pinned.selected_points) == quantile_count(0.8, 5)

    def test_cost_constraints_pin_first_row(self, box_instance, example1_data):
        D = np.vstack([np.eye(2), -np.eye(2)])
        d = np.concatenate([box_instance.A[0], -box_instance.A[0]])
        sol = solve_mqio(
            box_instance, example1_data, QioConfig(tau=0.3, theta=0.5),
            MqioOptions(cost_constraints=(D, d)),
        )
        assert sol.selected_facets == (0,) and sol.objective == 1

    def test_facet_cap_row(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8)
        sol = solve_mqio(box_instance, outlier_data, cfg, MqioOptions(max_facets=1))
        assert sol.objective == 1

    def test_theta_relaxation_keeps_certificate(self, box_instance, outlier_data):
        # a fit at a stricter quantile stays certified at a looser one
        sol = solve_mqio(box_instance, outlier_data, QioConfig(tau=1.0, theta=0.8))
        looser = QioConfig(tau=1.0, theta=0.6)
        certify_solution(box_instance, outlier_data, looser, sol)
        check = check_inverse_feasible(
            box_instance, outlier_data, looser, sol.selected_facets
        )
        assert check.feasible

    def test_doubled_big_m_changes_nothing(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8, normalization_p=1.0)
        facets, _ = feasible_facets(box_instance, outlier_data, cfg)
        big = compute_big_m(box_instance, outlier_data, cfg.tau)
        options = MqioOptions(restrict_facets=facets)
        base = solve_mip(build_mqio(box_instance, outlier_data, cfg, big, options))
        doubled = solve_mip(
            build_mqio(box_instance, outlier_data, cfg, big.scaled(2.0), options)
        )
        assert base.objective_value == pytest.approx(doubled.objective_value)

    def test_l1_error_norm(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8, error_norm="l1")
        sol = solve_mqio(box_instance, outlier_data, cfg)
        # corner images cost |e1|+|e2| <= 1 for the four clustered points
        assert sol.objective == 2 and sol.selected_facets == (0, 1)


class TestCheckInverseFeasible:
    def test_running_example_witnesses(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8)
        check = check_inverse_feasible(box_instance, outlier_data, cfg, (0, 1))
        assert check.feasible and check.count == 4
        for k, w in check.witnesses.items():
            assert np.allclose(w, [2.5, 2.5], atol=1e-6)

    def test_far_corner_fails(self, box_instance, example1_data):
        cfg = QioConfig(tau=0.3, theta=0.5)
        check = check_inverse_feasible(box_instance, example1_data, cfg, (2, 3))
        assert not check.feasible and check.count == 0

    def test_single_facet_agrees_with_screen(self, box_instance, example1_data):
        cfg = QioConfig(tau=0.3, theta=0.5)
        facets, covered = feasible_facets(box_instance, example1_data, cfg)
        for i in range(4):
            check = check_inverse_feasible(box_instance, example1_data, cfg, (i,))
            assert check.count == len(covered[i])
            assert check.feasible == (i in facets)

    def test_empty_intersection_reported(self, box_instance, example1_data):
        cfg = QioConfig(tau=10.0, theta=0.5)
        check = check_inverse_feasible(box_instance, example1_data, cfg, (0, 2))
        assert not check.feasible and check.reason == "empty facet intersection"


class TestRoundTrip:
    def test_solution_recertifies_and_mip_admits_it(
        self, box_instance, outlier_data
    ):
        cfg = QioConfig(tau=1.0, theta=0.8)
        sol = solve_mqio(box_instance, outlier_data, cfg)
        check = check_inverse_feasible(
            box_instance, outlier_data, cfg, sol.selected_facets
        )
        assert check.feasible
        # conversely: force the certified facet set into the model
        rebuilt = solution_from_facets(
            box_instance, outlier_data, cfg, sol.selected_facets
        )
        big = compute_big_m(box_instance, outlier_data, cfg.tau)
        options = MqioOptions(restrict_facets=sol.selected_facets)
        prog = build_mqio(box_instance, outlier_data, cfg, big, options)
        for pos in range(len(sol.selected_facets)):
            lay_index = prog.binary_indices[pos]
            prog.base.bounds[lay_index] = (1.0, 1.0)
        forced = solve_mip(prog)
        assert forced.is_optimal
        assert forced.objective_value == pytest.approx(len(rebuilt.selected_facets))

    def test_random_instances_certify(self):
        from qilp import gen_noisy_data, gen_random_instance

        for seed in range(4):
            inst = gen_random_instance(2, 6, seed=seed)
            rng = np.random.default_rng(seed)
            c_true = rng.normal(size=2)
            c_true /= np.linalg.norm(c_true)
            data = gen_noisy_data(inst, c_true, 5, 0.05, seed=seed)
            tau = min_tau(inst, data, 0.75).tau_star * 1.1
            sol = solve_mqio(inst, data, QioConfig(tau=tau, theta=0.75))
            certify_solution(
                inst, data, QioConfig(tau=tau, theta=0.75), sol
            )
