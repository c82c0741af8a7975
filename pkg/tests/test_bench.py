"""Heat benchmark construction, input generators, and the pipeline harness."""
import numpy as np
import pytest

from stochinput import bench
from stochinput.bench import (
    HeatModel,
    PipelineConfig,
    PipelineStageError,
    TrueInputModel,
    build_heat_system,
    identify_input_model,
    nsr_for_component,
    omega_for_nsr,
    reference_input_model,
    reference_perturbed_input_model,
    perturbed_input_model,
    run_pipeline,
    simulate_plant_with_input,
    stage_seed,
)
from stochinput.bench import _cell_index, _laplacian


class TestHeatModel:
    def test_laplacian_boundary_rows(self):
        model = HeatModel(grid_count=5, length=1.0)
        L = _laplacian(model)
        dx2 = model.dx**2
        # fixed-temperature end keeps the full -2 diagonal
        assert L[0, 0] == pytest.approx(-2.0 / dx2)
        assert L[0, 1] == pytest.approx(1.0 / dx2)
        # insulated end mirrors through a ghost node
        assert L[4, 4] == pytest.approx(-1.0 / dx2)
        assert L[4, 3] == pytest.approx(1.0 / dx2)

    def test_cell_index(self):
        model = HeatModel()
        assert _cell_index(model, 0.5) == 24
        assert _cell_index(model, 0.6) == 29
        with pytest.raises(ValueError):
            _cell_index(model, 2.0)

    def test_default_system_shape_and_stability(self, heat_system):
        assert (heat_system.n, heat_system.p, heat_system.q) == (50, 2, 2)
        assert heat_system.spectral_radius() < 1.0
        # sources inject dt * u at the source cells
        assert heat_system.B[24, 0].real == pytest.approx(HeatModel().dt)
        assert heat_system.C[0, 24].real == 1.0
        assert np.allclose(heat_system.Omega, 0.1 * np.eye(2))

    def test_euler_scheme_enforces_step_limit(self):
        with pytest.raises(ValueError, match="stability limit"):
            build_heat_system(HeatModel(scheme="euler"))
        stable_dt = 0.4 * HeatModel().dx ** 2 / (2 * HeatModel().diffusivity)
        sys = build_heat_system(HeatModel(scheme="euler", dt=stable_dt))
        assert sys.spectral_radius() < 1.0

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError, match="scheme"):
            build_heat_system(HeatModel(scheme="crank"))


class TestTrueInputModel:
    def test_reference_model_is_white(self):
        R = reference_input_model().exact_autocorrelation(5)
        assert np.allclose(R[0], 10.0 * np.eye(2))
        for m in range(1, 6):
            assert np.linalg.norm(R[m]) == 0.0

    def test_exact_autocorrelation_matches_samples(self, colored_input_model):
        R = colored_input_model.exact_autocorrelation(3)
        U = colored_input_model.simulate(300_000, seed=30).real
        for m in range(4):
            sample = U[: len(U) - m].T @ U[m:] / len(U)
            assert np.allclose(R[m].real, sample, atol=0.05)

    def test_unstable_dynamics_rejected(self):
        with pytest.raises(ValueError, match="stable"):
            TrueInputModel(
                A_e=1.5 * np.eye(2),
                B_e=np.eye(2),
                C_e=np.eye(2),
                cov_state=np.eye(2),
                cov_direct=np.zeros((2, 2)),
            )

    def test_perturbed_model_is_stable_and_seeded(self):
        base = reference_input_model()
        m1 = perturbed_input_model(seed=3)
        m2 = perturbed_input_model(seed=3)
        m3 = perturbed_input_model(seed=4)
        assert np.array_equal(m1.A_e, m2.A_e)
        assert not np.array_equal(m1.A_e, m3.A_e)
        assert not np.array_equal(m1.A_e, base.A_e)
        assert np.max(np.abs(np.linalg.eigvals(m1.A_e))) < 1.0

    def test_fixed_perturbed_baseline(self):
        model = reference_perturbed_input_model()
        assert np.max(np.abs(np.linalg.eigvals(model.A_e))) < 1.0
        # colored: nonzero correlation at lag one
        R = model.exact_autocorrelation(1)
        assert np.linalg.norm(R[1]) > 1.0


class TestSeeding:
    def test_stage_seeds_are_independent(self):
        a = np.random.default_rng(stage_seed(0, 1)).normal(size=4)
        b = np.random.default_rng(stage_seed(0, 2)).normal(size=4)
        a_again = np.random.default_rng(stage_seed(0, 1)).normal(size=4)
        assert np.array_equal(a, a_again)
        assert not np.array_equal(a, b)

    def test_plant_simulation_deterministic(self, heat_system):
        U = reference_input_model().simulate(50, seed=31)
        X1, Y1 = simulate_plant_with_input(heat_system, U, noise_seed=32)
        X2, Y2 = simulate_plant_with_input(heat_system, U, noise_seed=32)
        assert np.array_equal(X1, X2)
        assert np.array_equal(Y1, Y2)


class TestPipelineConfig:
    def test_json_round_trip(self):
        cfg = PipelineConfig(sample_count=1000, method="cg", heat={"grid_count": 10})
        back = PipelineConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError, match="unknown config fields"):
            PipelineConfig.from_json({"sample_count": 10, "grid": 50})


class TestPipeline:
    def test_stage_failures_are_tagged(self, heat_system):
        cfg = PipelineConfig(output_lags=100, sample_count=100)
        Y = np.zeros((50, 2))
        with pytest.raises(PipelineStageError) as exc_info:
            identify_input_model(heat_system, Y, cfg)
        assert exc_info.value.stage == 1
        assert "estimate-output-autocorr" in str(exc_info.value)

    def test_small_run_produces_consistent_artifacts(self):
        cfg = PipelineConfig(sample_count=20_000, filter_steps=100, seed=1)
        result = run_pipeline(cfg)
        assert result["input_autocorr"].N == cfg.input_lags
        assert result["input_errors"].max_relative() < 0.2
        run = result["filter_run"]
        assert run["estimates"].shape == (100, 50)
        assert run["coverage"].shape == (50,)
        assert set(result["wall_times"]) == set(bench.STAGES)
        assert run["armse"] > 0.0

    def test_nsr_helpers_are_inverse(self, heat_system):
        model = reference_input_model()
        omega = omega_for_nsr(heat_system, model, 24, 0.1)
        assert nsr_for_component(heat_system, model, 24, omega) == pytest.approx(0.1)
