"""Augmented-state Kalman filtering and estimation metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import FilterDivergenceError, RealizationError
from .lti import hermitian_part, spectral_radius
from .lti import _detectable as detectable_pair

STABILITY_TOL = 1e-9


@dataclass(frozen=True)
class AugmentedSystem:
    """Plant stacked with an input-model state, driven by standard white noise.

    ``A_aug = [[A, B C_n], [0, A_cl]]`` with noise-input matrix ``G_aug``
    stacking B P over B_n P, so the process-noise covariance is
    G_aug G_aug*.  ``Q`` is stored explicitly so baselines with a direct
    covariance description fit the same filter.
    """

    A_aug: np.ndarray
    C_aug: np.ndarray
    Q: np.ndarray
    Omega: np.ndarray
    G_aug: np.ndarray | None = None
    plant_dim: int = 0

    def __post_init__(self):
        for name in ("A_aug", "C_aug", "Q", "Omega"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        if self.G_aug is not None:
            g = np.asarray(self.G_aug, dtype=np.complex128)
            object.__setattr__(self, "G_aug", g)
            g.setflags(write=False)
        n = self.A_aug.shape[0]
        if self.A_aug.shape != (n, n) or self.C_aug.shape[1] != n or self.Q.shape != (n, n):
            raise ValueError("augmented matrices have inconsistent shapes")

    @property
    def dim(self):
        return self.A_aug.shape[0]

    @property
    def q(self):
        return self.C_aug.shape[0]

    def spectral_radius(self):
        return spectral_radius(self.A_aug)


def build_augmented(sys, inn):
    """Stack the plant with an innovations model of its unknown input."""
    if sys.p != inn.p:
        raise ValueError(
            f"plant input dimension {sys.p} != innovations output dimension {inn.p}"
        )
    n, r = sys.n, inn.order
    A_cl = inn.closed_loop_A
    if spectral_radius(A_cl) >= 1.0 - STABILITY_TOL:
        raise RealizationError("innovations model closed loop is unstable")
    A_aug = np.zeros((n + r, n + r), dtype=np.complex128)
    A_aug[:n, :n] = sys.A
    A_aug[:n, n:] = sys.B @ inn.C_n
    A_aug[n:, n:] = A_cl
    if spectral_radius(A_aug) >= 1.0 - STABILITY_TOL:
        raise RealizationError("augmented system is unstable")
    G_aug = np.vstack([sys.B @ inn.P, inn.B_n @ inn.P])
    C_aug = np.hstack([sys.C, np.zeros((sys.q, r), dtype=np.complex128)])
    if not detectable_pair(A_aug, C_aug):
        raise RealizationError("augmented pair is not detectable")
    return AugmentedSystem(
        A_aug=A_aug,
        C_aug=C_aug,
        Q=G_aug @ G_aug.conj().T,
        Omega=sys.Omega,
        G_aug=G_aug,
        plant_dim=n,
    )


def build_augmented_from_input_model(sys, input_model):
    """Augmented system for a plant driven by an assumed input state model.

    The input model is ``xi_k = A_e xi_{k-1} + B_e nu_{k-1}``,
    ``u_k = C_e xi_k + mu_k`` with known noise covariances; used for the
    assumed-model filtering baseline.
    """
    n = sys.n
    r = input_model.A_e.shape[0]
    A_aug = np.zeros((n + r, n + r), dtype=np.complex128)
    A_aug[:n, :n] = sys.A
    A_aug[:n, n:] = sys.B @ input_model.C_e
    A_aug[n:, n:] = input_model.A_e
    C_aug = np.hstack([sys.C, np.zeros((sys.q, r), dtype=np.complex128)])
    Q = np.zeros((n + r, n + r), dtype=np.complex128)
    Q[:n, :n] = sys.B @ input_model.cov_direct @ sys.B.conj().T
    Q[n:, n:] = input_model.B_e @ input_model.cov_state @ input_model.B_e.conj().T
    return AugmentedSystem(
        A_aug=A_aug, C_aug=C_aug, Q=Q, Omega=sys.Omega, plant_dim=n
    )


@dataclass(frozen=True)
class FilterState:
    """Posterior mean/covariance after ``step`` measurement updates."""

    mean: np.ndarray
    covariance: np.ndarray
    step: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.complex128).reshape(-1)
        cov = hermitian_part(np.asarray(self.covariance, dtype=np.complex128))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("covariance shape does not match the mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        mean.setflags(write=False)
        cov.setflags(write=False)


def initial_state(aug, scale=None):
    """Zero-mean start at the stationary prior uncertainty.

    With no ``scale`` given, the covariance is the steady-state prior
    from the Riccati equation, so the filter starts consistent with the
    stationary process.  If that solve fails, fall back to an identity
    covariance scaled by the trace heuristic trace(Q)/(1 - rho^2) spread
    over the dimensions, floored at 1.
    """
    d = aug.dim
    if scale is None:
        try:
            cov = steady_state_prior_covariance(aug)
            return FilterState(mean=np.zeros(d), covariance=cov, step=0)
        except (np.linalg.LinAlgError, ValueError):
            rho = min(aug.spectral_radius(), 1.0 - 1e-6)
            scale = max(np.trace(aug.Q).real / max(d, 1) / (1.0 - rho**2), 1.0)
    return FilterState(
        mean=np.zeros(d), covariance=scale * np.eye(d), step=0
    )


def kalman_step(state, aug, y):
    """One predict/update cycle; returns (new_state, innovation).

    The covariance update uses the Joseph form plus Hermitian
    symmetrization to preserve positive semidefiniteness.
    """
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    A, C = aug.A_aug, aug.C_aug
    x_pred = A @ state.mean
    P_pred = hermitian_part(A @ state.covariance @ A.conj().T + aug.Q)
    innovation = y - C @ x_pred
    S = C @ P_pred @ C.conj().T + aug.Omega
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise FilterDivergenceError(
            f"innovation covariance is numerically singular (cond {cond:.2e})"
        )
    K = scipy.linalg.solve(S.conj().T, (P_pred @ C.conj().T).conj().T).conj().T
    x_post = x_pred + K @ innovation
    IKC = np.eye(aug.dim) - K @ C
    P_post = hermitian_part(
        IKC @ P_pred @ IKC.conj().T + K @ aug.Omega @ K.conj().T
    )
    return FilterState(mean=x_post, covariance=P_post, step=state.step + 1), innovation


def run_filter(aug, measurements, state=None):
    """Filter a whole measurement sequence.

    Returns a dict with the posterior means, per-component standard
    deviations, and innovations, one row per step.
    """
    Y = np.atleast_2d(np.asarray(measurements, dtype=np.complex128))
    if state is None:
        state = initial_state(aug)
    T = Y.shape[0]
    means = np.empty((T, aug.dim), dtype=np.complex128)
    sigmas = np.empty((T, aug.dim))
    innovations = np.empty((T, aug.q), dtype=np.complex128)
    for k in range(T):
        state, innov = kalman_step(state, aug, Y[k])
        means[k] = state.mean
        sigmas[k] = np.sqrt(np.abs(np.diag(state.covariance).real))
        innovations[k] = innov
    return {
        "means": means,
        "sigmas": sigmas,
        "innovations": innovations,
        "final_state": state,
    }


def steady_state_prior_covariance(aug):
    """Fixed point of the filtering Riccati recursion, via the DARE."""
    return hermitian_part(
        scipy.linalg.solve_discrete_are(
            aug.A_aug.conj().T, aug.C_aug.conj().T, aug.Q, aug.Omega
        )
    )


def armse(estimates, truth):
    """Average over components of the per-component RMS estimation error."""
    est = np.atleast_2d(np.asarray(estimates))
    tru = np.atleast_2d(np.asarray(truth))
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    err = np.abs(est - tru) ** 2
    return float(np.mean(np.sqrt(np.mean(err, axis=0))))


def steady_state_signal_variance(aug):
    """Per-component steady-state variances E[x_i x_i*] of the free response."""
    Pi = scipy.linalg.solve_discrete_lyapunov(aug.A_aug, aug.Q)
    return np.abs(np.diag(Pi).real)


def nsr(signal_variance, omega_i):
    """Noise-to-signal ratio sqrt(|Omega_i| / E[x_i x_i*])."""
    if signal_variance <= 0:
        raise ValueError("steady-state signal variance must be positive")
    return float(np.sqrt(abs(omega_i) / signal_variance))


def innovation_autocorrelation(innovations, max_lag):
    """Normalized innovation autocorrelations at lags 1..max_lag.

    Returns the ratio |trace R(m)| / trace R(0); values near zero indicate
    a white innovation sequence, i.e. a consistent filter model.
    """
    V = np.atleast_2d(np.asarray(innovations, dtype=np.complex128))
    T = V.shape[0]
    r0 = np.einsum("ki,ki->", V, V.conj()).real / T
    out = np.empty(max_lag)
    for m in range(1, max_lag + 1):
        rm = np.einsum("ki,ki->", V[: T - m], V[m:].conj()) / T
        out[m - 1] = abs(rm) / r0
    return out
