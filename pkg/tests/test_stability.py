import numpy as np
import pytest

from qilp import (
    Dataset,
    DimensionError,
    QioConfig,
    ShiftExperimentConfig,
    StabilityReport,
    empirical_inverse_stability,
    facet_diameter,
    forward_stability,
    forward_stability_sweep,
    forward_stability_ub,
    inverse_stability_lb,
    per_facet_stability_bounds,
    sample_cone_costs,
    solve_mqio,
)
from conftest import enumerate_vertices_2d, oracle_min_facet_distance


@pytest.fixture
def running_fit(box_instance, outlier_data):
    cfg = QioConfig(tau=1.0, theta=0.8, normalization_p=1.0)
    return cfg, solve_mqio(box_instance, outlier_data, cfg)


class TestLowerBound:
    def test_hand_computed_value(self, box_instance, outlier_data, running_fit):
        # facet 0 distances (0.2,0.2,0.5,0.5,2.2): two largest clip to 0.5;
        # facet 1 distances (0.5,0.3,0.3,0.5,0.3): two largest clip to 1.0
        cfg, sol = running_fit
        bounds = per_facet_stability_bounds(
            box_instance, outlier_data, cfg, sol.selected_facets
        )
        assert bounds[0] == pytest.approx(0.5, abs=1e-6)
        assert bounds[1] == pytest.approx(1.0, abs=1e-6)
        assert inverse_stability_lb(
            box_instance, outlier_data, cfg, sol
        ) == pytest.approx(1.0, abs=1e-6)

    def test_oracle_agreement_on_clipped_sums(
        self, box_instance, outlier_data, running_fit
    ):
        cfg, sol = running_fit
        r = 2  # floor((1-0.8)*5) + 1
        for i in sol.selected_facets:
            dists = sorted(
                (
                    oracle_min_facet_distance(box_instance, i, p)
                    for p in outlier_data.points
                ),
                reverse=True,
            )
            expect = sum(max(0.0, cfg.tau - d) for d in dists[:r])
            got = per_facet_stability_bounds(
                box_instance, outlier_data, cfg, (i,)
            )[i]
            assert got == pytest.approx(expect, abs=1e-6)

    def test_small_tau_clips_to_zero(self, box_instance, outlier_data):
        # the two largest distances exceed tau on both facets, so every
        # term clips to zero
        cfg = QioConfig(tau=0.25, theta=0.8)
        bounds = per_facet_stability_bounds(box_instance, outlier_data, cfg, (0, 1))
        assert bounds[0] == pytest.approx(0.0, abs=1e-9)
        assert bounds[1] == pytest.approx(0.0, abs=1e-9)
        partial = per_facet_stability_bounds(
            box_instance, outlier_data, QioConfig(tau=0.6, theta=0.8), (0, 1)
        )
        assert partial[0] == pytest.approx(0.1, abs=1e-9)
        assert partial[1] == pytest.approx(0.2, abs=1e-9)

    def test_bound_grows_as_theta_drops(self, box_instance, outlier_data, running_fit):
        cfg, sol = running_fit
        values = []
        for theta in (1.0, 0.8, 0.6, 0.4):
            c = QioConfig(tau=1.0, theta=theta, normalization_p=1.0)
            values.append(inverse_stability_lb(box_instance, outlier_data, c, sol))
        assert all(a <= b + 1e-9 for a, b in zip(values, values[1:]))


class TestEmpirical:
    def test_estimate_dominates_lower_bound(
        self, box_instance, outlier_data, running_fit
    ):
        cfg, sol = running_fit
        lb = inverse_stability_lb(box_instance, outlier_data, cfg, sol)
        exp = ShiftExperimentConfig(
            gamma_grid=tuple(np.arange(0.5, 9.0, 0.5)), rng_seed=11
        )
        for trial in range(6):
            out = empirical_inverse_stability(
                box_instance, outlier_data, cfg, exp, trial
            )
            assert out is not None
            dist, gamma = out
            assert dist >= lb - 1e-9

    def test_grid_exhaustion_returns_none(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8)
        exp = ShiftExperimentConfig(gamma_grid=(0.01,), rng_seed=0)
        assert (
            empirical_inverse_stability(box_instance, outlier_data, cfg, exp) is None
        )

    def test_huge_shift_guarantees_emptiness(self, box_instance, example1_data):
        cfg = QioConfig(tau=0.55, theta=1.0)
        exp = ShiftExperimentConfig(gamma_grid=(50.0,), rng_seed=4)
        out = empirical_inverse_stability(box_instance, example1_data, cfg, exp)
        assert out is not None and out[1] == 50.0

    def test_stricter_theta_breaks_no_later(self, box_instance, outlier_data):
        grid = tuple(np.arange(0.25, 12.0, 0.25))
        gammas = {}
        for theta in (1.0, 0.75):
            cfg = QioConfig(tau=1.0, theta=theta)
            exp = ShiftExperimentConfig(gamma_grid=grid, rng_seed=9)
            out = empirical_inverse_stability(box_instance, outlier_data, cfg, exp)
            assert out is not None
            gammas[theta] = out[1]
        assert gammas[1.0] <= gammas[0.75] + 1e-9

    def test_config_validation(self):
        with pytest.raises(DimensionError):
            ShiftExperimentConfig(gamma_grid=(1.0, 0.5))
        with pytest.raises(DimensionError):
            ShiftExperimentConfig(gamma_grid=())


class TestForward:
    def test_segment_face_golden(self, box_instance, outlier_data):
        # c = a2: the optimal face is the right edge; the worst selected
        # point against endpoint (2.5, 0) is (2, 2.3) at distance 2.3
        # (endpoint enumeration over the face's two vertices).
        d = forward_stability(
            box_instance, outlier_data, [-1.0, 0.0], (0, 1, 2, 3)
        )
        assert d == pytest.approx(2.3, abs=1e-6)

    def test_unique_optimum_within_tau(self, box_instance, outlier_data, running_fit):
        cfg, sol = running_fit
        d = forward_stability(
            box_instance, outlier_data, sol.representative_c, sol.selected_points
        )
        assert d == pytest.approx(0.5, abs=1e-6)
        assert d <= cfg.tau

    def test_single_point_on_face_is_zero(self, box_instance):
        data = Dataset(np.array([[2.5, 2.5]]))
        assert forward_stability(
            box_instance, data, [-1.0, -1.0], (0,)
        ) == pytest.approx(0.0, abs=1e-7)

    def test_upper_bound_golden(self, box_instance, outlier_data, running_fit):
        cfg, sol = running_fit
        rho = {i: 2.5 for i in sol.selected_facets}
        ub = forward_stability_ub(box_instance, outlier_data, sol, rho)
        assert ub == pytest.approx(3.0, abs=1e-6)
        exact = forward_stability(
            box_instance, outlier_data, sol.representative_c, sol.selected_points
        )
        assert exact <= ub

    def test_zero_diameter_bound_equals_witness_distance(
        self, box_instance, outlier_data, running_fit
    ):
        cfg, sol = running_fit
        rho = {i: 0.0 for i in sol.selected_facets}
        ub = forward_stability_ub(box_instance, outlier_data, sol, rho)
        assert ub == pytest.approx(0.5, abs=1e-6)

    def test_exact_diameters_dominate(self, box_instance, outlier_data, running_fit):
        cfg, sol = running_fit
        rho = {i: facet_diameter(box_instance, i) for i in sol.selected_facets}
        ub = forward_stability_ub(box_instance, outlier_data, sol, rho)
        exact = forward_stability(
            box_instance, outlier_data, sol.representative_c, sol.selected_points
        )
        assert exact <= ub + 1e-9


class TestSweep:
    def test_nested_caps_do_not_hurt_stability(self, box_instance, outlier_data):
        cfg = QioConfig(tau=1.0, theta=0.8)
        rows, fits = forward_stability_sweep(
            box_instance, outlier_data, cfg, samples=8, rng_seed=2
        )
        assert sorted(fits) == [1, 2]
        medians = {
            h: float(np.median([d for hh, _, d in rows if hh == h])) for h in fits
        }
        assert medians[2] <= medians[1] + 1e-9
        assert medians[2] <= cfg.tau
        # nested facet sets: the capped fit picks a subset of the full one
        if set(fits[1].selected_facets) <= set(fits[2].selected_facets):
            for k in fits[2].selected_points:
                d1 = forward_stability(
                    box_instance, outlier_data, fits[1].representative_c, (k,)
                )
                d2 = forward_stability(
                    box_instance, outlier_data, fits[2].representative_c, (k,)
                )
                assert d2 <= d1 + 1e-9


def test_report_rejects_contradictory_bounds():
    with pytest.raises(DimensionError):
        StabilityReport(2.0, 1.0, {}, None)
    StabilityReport(1.0, 2.0, {}, None)
    StabilityReport(1.0, None, {}, 0.5)


def test_sampled_costs_are_unit_norm(box_instance):
    costs = sample_cone_costs(box_instance, (0, 1), 5, rng_seed=1, p=1.0)
    for c in costs:
        assert abs(np.abs(c).sum() - 1.0) <= 1e-9
        assert c[0] < 0 and c[1] < 0
