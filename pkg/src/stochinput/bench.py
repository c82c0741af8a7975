"""Benchmark builders and the end-to-end experiment pipeline.

Provides the conduction-slab plant, synthetic stationary input
generators, the perturbed-model filtering baseline, and the harness that
runs identification and state estimation end to end.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg

from . import armodel as armod
from . import filtering, lti, realization, recovery
from .autocorr import (
    CorrelationSequence,
    relative_error,
    sample_autocorrelation,
    subtract_noise_floor,
)
from .exceptions import StochInputError
from .lti import LtiSystem, gaussian_vectors, hermitian_part, markov_parameters


class PipelineStageError(StochInputError):
    """Failure inside a pipeline stage, tagged with the stage index/name."""

    def __init__(self, stage, name, cause):
        super().__init__(f"stage {stage} ({name}) failed: {cause}")
        self.stage = stage
        self.stage_name = name
        self.__cause__ = cause


def stage_seed(root_seed, index):
    """Counter-based seed splitter: stage ``index`` of run ``root_seed``."""
    return np.random.SeedSequence([int(root_seed), int(index)])


# ---------------------------------------------------------------------------
# Heat-conduction plant


@dataclass(frozen=True)
class HeatModel:
    """Conduction along a slab with a fixed end and an insulated end.

    Fifty equally spaced cells by default, with point sources and sensors
    at 0.5 m and 0.6 m.  ``scheme`` selects the time discretization:
    ``"exact"`` uses the matrix exponential of the diffusion operator and
    has no step-size restriction; ``"euler"`` is explicit and enforces
    dt <= dx^2 / (2 alpha).
    """

    grid_count: int = 50
    length: float = 1.0
    diffusivity: float = 1e-4
    dt: float = 50.0
    scheme: str = "exact"
    source_positions: tuple = (0.5, 0.6)
    sensor_positions: tuple = (0.5, 0.6)
    noise_covariance_scale: float = 0.1

    @property
    def dx(self):
        return self.length / self.grid_count


def _laplacian(model):
    """Second-difference operator with T(0) = 0 and insulated far end."""
    n = model.grid_count
    dx2 = model.dx**2
    L = np.zeros((n, n))
    for i in range(n):
        L[i, i] = -2.0 / dx2
        if i > 0:
            L[i, i - 1] = 1.0 / dx2
        if i < n - 1:
            L[i, i + 1] = 1.0 / dx2
    # ghost node at the insulated end mirrors the boundary cell
    L[n - 1, n - 1] = -1.0 / dx2
    return L


def _cell_index(model, position):
    idx = int(round(position / model.dx)) - 1
    if not 0 <= idx < model.grid_count:
        raise ValueError(f"position {position} outside the slab")
    return idx


def build_heat_system(model=HeatModel()):
    """Discretize the slab into an LtiSystem with point sources and sensors."""
    L = _laplacian(model)
    n = model.grid_count
    if model.scheme == "euler":
        limit = model.dx**2 / (2.0 * model.diffusivity)
        if model.dt > limit:
            raise ValueError(
                f"explicit step dt={model.dt} exceeds the stability limit {limit:.3e}"
            )
        A = np.eye(n) + model.dt * model.diffusivity * L
    elif model.scheme == "exact":
        A = scipy.linalg.expm(model.dt * model.diffusivity * L)
    else:
        raise ValueError(f"unknown scheme {model.scheme!r}")
    B = np.zeros((n, len(model.source_positions)))
    for j, pos in enumerate(model.source_positions):
        B[_cell_index(model, pos), j] = model.dt
    C = np.zeros((len(model.sensor_positions), n))
    for i, pos in enumerate(model.sensor_positions):
        C[i, _cell_index(model, pos)] = 1.0
    Omega = model.noise_covariance_scale * np.eye(len(model.sensor_positions))
    return LtiSystem(A=A, B=B, C=C, Omega=Omega)


# ---------------------------------------------------------------------------
# Stationary input generators


@dataclass(frozen=True)
class TrueInputModel:
    """Ground-truth stationary input: a linear state model plus direct noise.

    xi_k = A_e xi_{k-1} + B_e nu_{k-1},  u_k = C_e xi_k + mu_k, where nu
    has covariance ``cov_state`` and mu has covariance ``cov_direct``.
    """

    A_e: np.ndarray
    B_e: np.ndarray
    C_e: np.ndarray
    cov_state: np.ndarray
    cov_direct: np.ndarray

    def __post_init__(self):
        for name in ("A_e", "B_e", "C_e", "cov_state", "cov_direct"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        if lti.spectral_radius(self.A_e) >= 1.0:
            raise ValueError("input state matrix must be stable")

    @property
    def p(self):
        return self.C_e.shape[0]

    def state_covariance(self):
        Q = self.B_e @ self.cov_state @ self.B_e.conj().T
        if not np.any(Q):
            return np.zeros_like(self.A_e)
        return hermitian_part(scipy.linalg.solve_discrete_lyapunov(self.A_e, Q))

    def exact_autocorrelation(self, N):
        """R_uu(m) for |m| <= N from the steady-state covariance."""
        Sigma = self.state_covariance()
        p = self.p
        R_pos = np.empty((N + 1, p, p), dtype=np.complex128)
        R_pos[0] = hermitian_part(self.C_e @ Sigma @ self.C_e.conj().T + self.cov_direct)
        block = Sigma
        for m in range(1, N + 1):
            block = block @ self.A_e.conj().T
            R_pos[m] = self.C_e @ block @ self.C_e.conj().T
        return CorrelationSequence.from_nonnegative_lags(R_pos)

    def simulate(self, count, seed=0, stationary_start=True):
        """Sample a length-``count`` input trajectory."""
        rng = np.random.default_rng(seed)
        r = self.A_e.shape[0]
        real = all(
            np.linalg.norm(M.imag) == 0
            for M in (self.A_e, self.B_e, self.C_e, self.cov_state, self.cov_direct)
        )
        cov_state = self.cov_state.real if real else self.cov_state
        cov_direct = self.cov_direct.real if real else self.cov_direct
        nu = gaussian_vectors(rng, cov_state, count)
        mu = gaussian_vectors(rng, cov_direct, count)
        xi = np.zeros(r, dtype=np.complex128)
        if stationary_start:
            Sigma = self.state_covariance()
            xi = gaussian_vectors(rng, Sigma.real if real else Sigma, 1)[0]
        U = np.empty((count, self.p), dtype=np.complex128)
        for k in range(count):
            U[k] = self.C_e @ xi + mu[k]
            xi = self.A_e @ xi + self.B_e @ nu[k]
        return U


def reference_input_model():
    """Reference two-channel stationary input used by the heat benchmark."""
    A_e = np.array([[0.3, 0.5], [0.4, 0.2]])
    return TrueInputModel(
        A_e=A_e,
        B_e=np.eye(2),
        C_e=np.eye(2),
        cov_state=np.zeros((2, 2)),
        cov_direct=10.0 * np.eye(2),
    )


def reference_perturbed_input_model():
    """Fixed perturbed-dynamics instance used by the assumed-model baseline."""
    A_o = np.array([[0.4569, 0.2768], [0.2214, 0.4016]])
    return TrueInputModel(
        A_e=A_o,
        B_e=np.eye(2),
        C_e=np.eye(2),
        cov_state=10.0 * np.eye(2),
        cov_direct=np.zeros((2, 2)),
    )


def perturbed_input_model(seed, spreads=(0.3, 0.8), max_retries=100):
    """Randomly perturb the reference model's eigenvalues, keep eigenvectors.

    Eigenvalue i is shifted by a uniform draw in [-spreads[i], spreads[i]];
    unstable draws are rejected and retried.
    """
    base = reference_input_model()
    w, V = np.linalg.eig(base.A_e)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        shifts = np.array([rng.uniform(-s, s) for s in spreads])
        w_new = w + shifts
        if np.max(np.abs(w_new)) < 1.0:
            A_o = (V @ np.diag(w_new) @ np.linalg.inv(V)).real
            return replace(base, A_e=A_o)
    raise RuntimeError("could not draw a stable perturbed input model")


def simulate_plant_with_input(sys, inputs, noise_seed=0, x0=None):
    """Propagate the plant under a given input; returns (states, outputs)."""
    U = np.atleast_2d(np.asarray(inputs, dtype=np.complex128))
    T = U.shape[0]
    rng = np.random.default_rng(noise_seed)
    omega = sys.Omega.real if sys.is_real else sys.Omega
    noise = gaussian_vectors(rng, omega, T)
    x = np.zeros(sys.n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128)
    X = np.empty((T, sys.n), dtype=np.complex128)
    Y = np.empty((T, sys.q), dtype=np.complex128)
    for k in range(T):
        x = sys.A @ x + sys.B @ U[k]
        X[k] = x
        Y[k] = sys.C @ x + noise[k]
    return X, Y


def true_augmented_system(sys, input_model):
    """Plant + true input model, for steady-state signal statistics."""
    return filtering.build_augmented_from_input_model(sys, input_model)


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class PipelineConfig:
    """Scenario description for the identification + filtering pipeline.

    Desk-scale defaults keep a full run in CI time; the large-scale values
    from the reference experiments can be set explicitly.
    """

    markov_count: int = 400
    input_lags: int = 40
    output_lags: int = 200
    sample_count: int = 200_000
    ar_order: object = "auto"
    era_order: object = "auto"
    method: str = "direct"
    memory_budget: int = recovery.DEFAULT_MEMORY_BUDGET
    rom_order: int | None = None
    filter_steps: int = 200
    seed: int = 0
    heat: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, obj):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**obj)


# Stage indices used for error tagging and timing.
STAGES = (
    "estimate-output-autocorr",
    "build-coefficient-matrix",
    "solve-input-autocorr",
    "fit-ar-model",
    "residual-covariance",
    "realize-state-space",
    "whiten-and-assemble",
)


class _StageTimer:
    def __init__(self):
        self.wall_times = {}

    def run(self, index, fn):
        name = STAGES[index - 1]
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise PipelineStageError(index, name, exc) from exc
        self.wall_times[name] = time.perf_counter() - start
        return result


def identify_input_model(
    sys,
    measurements,
    config,
    markov=None,
):
    """Run the identification stages on recorded measurements.

    Returns a dict with the recovered autocorrelations, AR model,
    innovations model, solver diagnostics, and per-stage wall times.
    """
    timer = _StageTimer()
    Ryy = timer.run(
        1, lambda: sample_autocorrelation(measurements, config.output_lags)
    )
    Ryy_hat = subtract_noise_floor(Ryy, sys.Omega)
    if markov is None:
        markov = markov_parameters(sys, config.markov_count)
    Cm = timer.run(
        2,
        lambda: recovery.build_coefficient_matrix(
            markov,
            config.input_lags,
            config.output_lags,
            memory_budget=config.memory_budget,
        ),
    )
    Ruu, solve_info = timer.run(
        3, lambda: recovery.solve_input_autocorr(Cm, Ryy_hat, method=config.method)
    )
    if config.ar_order == "auto":
        order = armod.select_ar_order(
            Ruu, sample_count=config.sample_count
        )
    else:
        order = int(config.ar_order)
    coeffs = timer.run(4, lambda: armod.solve_ar_coefficients(Ruu, order))
    omega_r = timer.run(5, lambda: armod.residual_covariance(Ruu, coeffs))
    model = armod.ArModel(coeffs=coeffs, Omega_r=omega_r)
    inn = timer.run(
        6, lambda: armod.realize_innovations(model, era_order=config.era_order)
    )
    aug = timer.run(7, lambda: filtering.build_augmented(sys, inn))
    return {
        "output_autocorr": Ryy,
        "corrected_output_autocorr": Ryy_hat,
        "coefficient_matrix": Cm,
        "input_autocorr": Ruu,
        "solve_info": solve_info,
        "ar_model": model,
        "ar_order": order,
        "innovations": inn,
        "augmented": aug,
        "wall_times": timer.wall_times,
    }


def run_pipeline(config=PipelineConfig(), input_model=None, heat_model=None):
    """Full experiment: simulate, identify, filter, score.

    Truth trajectories and filter runs use independent seeds split from
    the root seed, so stage reordering cannot silently change results.
    """
    if heat_model is None:
        heat_model = HeatModel(**config.heat)
    sys = build_heat_system(heat_model)
    if input_model is None:
        input_model = reference_input_model()

    # identification data
    U_id = input_model.simulate(config.sample_count, seed=stage_seed(config.seed, 0))
    _, Y_id = simulate_plant_with_input(
        sys, U_id, noise_seed=stage_seed(config.seed, 1)
    )

    markov = None
    rom = None
    if config.rom_order is not None:
        rom, _ = realization.bpod_reduce(sys, config.rom_order)
        markov = rom.markov_parameters(config.markov_count)

    result = identify_input_model(sys, Y_id, config, markov=markov)

    # comparison against the exact input statistics
    Ruu_true = input_model.exact_autocorrelation(config.input_lags)
    result["true_input_autocorr"] = Ruu_true
    result["input_errors"] = relative_error(Ruu_true, result["input_autocorr"])
    result["rom"] = rom
    result["plant"] = sys
    result["input_model"] = input_model

    # filtering comparison on a fresh truth trajectory
    U_f = input_model.simulate(config.filter_steps, seed=stage_seed(config.seed, 2))
    X_f, Y_f = simulate_plant_with_input(
        sys, U_f, noise_seed=stage_seed(config.seed, 3)
    )
    filt = filtering.run_filter(result["augmented"], Y_f)
    n = sys.n
    est = filt["means"][:, :n]
    errors = np.abs(est - X_f)
    sigma3 = 3.0 * filt["sigmas"][:, :n]
    result["filter_run"] = {
        "truth": X_f,
        "measurements": Y_f,
        "estimates": est,
        "errors": errors,
        "sigma3": sigma3,
        "innovations": filt["innovations"],
        "armse": filtering.armse(est, X_f),
        "coverage": np.mean(errors <= sigma3, axis=0),
        "innovation_whiteness": filtering.innovation_autocorrelation(
            filt["innovations"], 5
        ),
    }
    return result


def nsr_for_component(sys, input_model, component, omega_value):
    """NSR at a plant state for a given scalar measurement-noise variance."""
    aug = true_augmented_system(sys, input_model)
    variances = filtering.steady_state_signal_variance(aug)
    return filtering.nsr(variances[component], omega_value)


def omega_for_nsr(sys, input_model, component, target_nsr):
    """Scalar measurement-noise variance hitting a target NSR at a state."""
    aug = true_augmented_system(sys, input_model)
    variances = filtering.steady_state_signal_variance(aug)
    return float(target_nsr**2 * variances[component])


# Noise-to-signal levels of the reference sweep, as fractions.
SWEEP_NSR_LEVELS = (0.002215, 0.068704, 0.135171, 0.203456, 0.269467)


def nsr_sweep(
    config=PipelineConfig(),
    levels=SWEEP_NSR_LEVELS,
    runs=10,
    component=None,
    assumed_model=None,
):
    """Monte-Carlo ARMSE comparison across measurement-noise levels.

    For each NSR level the measurement-noise variance is set to hit that
    ratio at the monitored state, the input model is re-identified, and
    ``runs`` independent trajectories are filtered with both the
    identified model and the assumed (perturbed) baseline model.
    """
    heat = HeatModel(**config.heat)
    base_sys = build_heat_system(heat)
    input_model = reference_input_model()
    if component is None:
        component = _cell_index(heat, heat.sensor_positions[0])
    if assumed_model is None:
        assumed_model = reference_perturbed_input_model()
    aug_true = true_augmented_system(base_sys, input_model)
    signal_var = filtering.steady_state_signal_variance(aug_true)[component]

    rows = []
    for level_idx, target in enumerate(levels):
        omega_value = float(target**2 * signal_var)
        sys = LtiSystem(
            A=base_sys.A,
            B=base_sys.B,
            C=base_sys.C,
            Omega=omega_value * np.eye(base_sys.q),
        )
        level_seed = 1000 * (level_idx + 1) + config.seed
        U_id = input_model.simulate(config.sample_count, seed=stage_seed(level_seed, 0))
        _, Y_id = simulate_plant_with_input(
            sys, U_id, noise_seed=stage_seed(level_seed, 1)
        )
        ident = identify_input_model(sys, Y_id, config)
        aug_ar = ident["augmented"]
        aug_assumed = filtering.build_augmented_from_input_model(sys, assumed_model)
        armse_ar = []
        armse_assumed = []
        for run in range(runs):
            U = input_model.simulate(
                config.filter_steps, seed=stage_seed(level_seed, 10 + 2 * run)
            )
            X, Y = simulate_plant_with_input(
                sys, U, noise_seed=stage_seed(level_seed, 11 + 2 * run)
            )
            for aug, sink in ((aug_ar, armse_ar), (aug_assumed, armse_assumed)):
                out = filtering.run_filter(aug, Y)
                sink.append(filtering.armse(out["means"][:, : sys.n], X))
        rows.append(
            {
                "nsr": float(target),
                "omega": omega_value,
                "armse_ar_based": float(np.mean(armse_ar)),
                "armse_assumed_model": float(np.mean(armse_assumed)),
                "ar_order": ident["ar_order"],
            }
        )
    return rows
