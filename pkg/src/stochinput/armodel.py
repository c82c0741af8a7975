"""Vector AR fitting on autocorrelation data and the innovations model.

The coefficients of ``u_k = sum_i a_i u_{k-i} + eps_k`` are obtained from
the block-Toeplitz linear system relating them to the autocorrelations,
the residual covariance closes the fit, and the whitened state-space
innovations model is produced through a balanced realization of the
closed-loop impulse response.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .autocorr import CorrelationSequence
from .exceptions import DegenerateProcessError, RealizationError
from .lti import (
    MarkovSequence,
    hermitian_part,
    matrix_from_json,
    matrix_to_json,
    spectral_radius,
)
from .realization import era

# Jitter applied once to a near-singular residual covariance before Cholesky.
CHOLESKY_JITTER = 1e-10
STATIONARY_TOL = 1e-9


@dataclass(frozen=True)
class ArModel:
    """AR coefficient matrices a_1..a_M (p x p) and residual covariance."""

    coeffs: np.ndarray
    Omega_r: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
            raise ValueError(f"coeffs must have shape (order, p, p), got {coeffs.shape}")
        Omega_r = np.asarray(self.Omega_r, dtype=np.complex128)
        p = coeffs.shape[1]
        if Omega_r.shape != (p, p):
            raise ValueError(f"Omega_r must be {p}x{p}, got {Omega_r.shape}")
        rho = spectral_radius(companion_matrix(coeffs))
        if rho >= 1.0 - STATIONARY_TOL:
            raise DegenerateProcessError(
                f"fitted AR model is not stationary (companion radius {rho:.6f})"
            )
        eigs = np.linalg.eigvalsh(hermitian_part(Omega_r))
        if np.any(eigs < -1e-10 * max(np.linalg.norm(Omega_r), 1.0)):
            raise DegenerateProcessError("residual covariance is indefinite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "Omega_r", hermitian_part(Omega_r))
        coeffs.setflags(write=False)

    @property
    def order(self):
        return self.coeffs.shape[0]

    @property
    def p(self):
        return self.coeffs.shape[1]

    def to_json(self):
        return {
            "order": self.order,
            "a": [matrix_to_json(a) for a in self.coeffs],
            "Omega_r": matrix_to_json(self.Omega_r),
        }

    @classmethod
    def from_json(cls, obj):
        coeffs = np.stack([matrix_from_json(a) for a in obj["a"]])
        return cls(coeffs=coeffs, Omega_r=matrix_from_json(obj["Omega_r"]))


def companion_matrix(coeffs):
    """Block companion matrix of the AR recursion."""
    order, p, _ = coeffs.shape
    F = np.zeros((order * p, order * p), dtype=np.complex128)
    F[:p] = np.hstack(list(coeffs))
    if order > 1:
        F[p:, : (order - 1) * p] = np.eye((order - 1) * p)
    return F


def _toeplitz_gram(Ruu, order):
    p = Ruu.dim
    T = np.empty((order * p, order * p), dtype=np.complex128)
    for i in range(order):
        for j in range(order):
            T[i * p : (i + 1) * p, j * p : (j + 1) * p] = Ruu[i - j]
    return T


def solve_ar_coefficients(Ruu, order):
    """Coefficients from the block-Toeplitz system, without the covariance."""
    if Ruu.N < order:
        raise ValueError(f"need lags up to {order}, sequence has {Ruu.N}")
    p = Ruu.dim
    T = _toeplitz_gram(Ruu, order)
    rhs = np.hstack([Ruu[-(i + 1)] for i in range(order)])  # p x (order p)
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1e14:
        raise DegenerateProcessError(
            f"block-Toeplitz matrix is numerically singular (cond {cond:.2e})"
        )
    # solve  a_row @ T = rhs  with a_row = (a_1 ... a_order)
    a_row = scipy.linalg.solve(T.T, rhs.T).T
    return np.stack(
        [a_row[:, i * p : (i + 1) * p] for i in range(order)]
    )


def residual_covariance(Ruu, coeffs):
    """Residual white-noise covariance of an AR fit.

    Omega_r = Ruu(0) - sum_{i,j} a_i Ruu(i-j) a_j*; the result is
    symmetrized and must be positive semidefinite up to round-off.
    """
    order, p, _ = coeffs.shape
    if Ruu.N < 2 * order:
        raise ValueError(
            f"need lags up to {2 * order} for the covariance, sequence has {Ruu.N}"
        )
    acc = np.zeros((p, p), dtype=np.complex128)
    for i in range(1, order + 1):
        for j in range(1, order + 1):
            acc += coeffs[i - 1] @ Ruu[i - j] @ coeffs[j - 1].conj().T
    omega = hermitian_part(Ruu[0] - acc)
    eigs = np.linalg.eigvalsh(omega)
    scale = max(np.linalg.norm(Ruu[0]), 1.0)
    if np.any(eigs < -1e-10 * scale):
        raise DegenerateProcessError(
            f"residual covariance is indefinite (min eigenvalue {eigs.min():.3e})"
        )
    return omega


def fit_yule_walker(Ruu, order):
    """Fit an AR model of the given order to an autocorrelation sequence."""
    coeffs = solve_ar_coefficients(Ruu, order)
    omega = residual_covariance(Ruu, coeffs)
    return ArModel(coeffs=coeffs, Omega_r=omega)


def select_ar_order(Ruu, max_order=None, sample_count=1000):
    """Order minimizing the final prediction error over 1..max_order."""
    if max_order is None:
        max_order = min(20, Ruu.N // 2)
    max_order = max(1, min(max_order, Ruu.N // 2))
    p = Ruu.dim
    best_order, best_fpe = 1, np.inf
    for order in range(1, max_order + 1):
        try:
            model = fit_yule_walker(Ruu, order)
        except DegenerateProcessError:
            continue
        dof = p * order + 1
        if sample_count <= dof:
            break
        fpe = abs(np.linalg.det(model.Omega_r)) * (
            (sample_count + dof) / (sample_count - dof)
        ) ** p
        if fpe < best_fpe:
            best_order, best_fpe = order, fpe
    return best_order


def closed_loop_markov(model, count):
    """Impulse response of the whitened recursion driven by its residual.

    hhat_1 = a_1 and hhat_k = a_k + sum_{j<k} a_j hhat_{k-j} (a_k = 0 past
    the model order); these are the Markov parameters of the stable
    closed-loop system realizing the AR transfer.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    p = model.p
    hhat = np.zeros((count, p, p), dtype=np.complex128)
    for k in range(1, count + 1):
        acc = np.zeros((p, p), dtype=np.complex128)
        if k <= model.order:
            acc += model.coeffs[k - 1]
        for j in range(1, min(k - 1, model.order) + 1):
            acc += model.coeffs[j - 1] @ hhat[k - j - 1]
        hhat[k - 1] = acc
    return MarkovSequence(h=hhat)


@dataclass(frozen=True)
class InnovationsModel:
    """Whitened state-space model reproducing the fitted input statistics.

    eta_k = A_cl eta_{k-1} + B_n P w_{k-1},  u_k = C_n eta_k + P w_k,
    with w_k standard white noise and A_cl = A_n + B_n C_n stable.
    """

    A_n: np.ndarray
    B_n: np.ndarray
    C_n: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        for name in ("A_n", "B_n", "C_n", "P"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        rho = spectral_radius(self.closed_loop_A)
        if rho >= 1.0 - STATIONARY_TOL:
            raise RealizationError(
                f"closed-loop matrix is unstable (spectral radius {rho:.6f})"
            )

    @property
    def order(self):
        return self.A_n.shape[0]

    @property
    def p(self):
        return self.P.shape[0]

    @property
    def closed_loop_A(self):
        return self.A_n + self.B_n @ self.C_n

    @property
    def Omega_r(self):
        return self.P @ self.P.conj().T

    def simulate(self, count, seed=0):
        """Sample a length-``count`` input trajectory from seeded white noise."""
        rng = np.random.default_rng(seed)
        real = (
            np.linalg.norm(self.A_n.imag) == 0
            and np.linalg.norm(self.B_n.imag) == 0
            and np.linalg.norm(self.C_n.imag) == 0
            and np.linalg.norm(self.P.imag) == 0
        )
        if real:
            w = rng.standard_normal((count, self.p))
        else:
            w = (
                rng.standard_normal((count, self.p))
                + 1j * rng.standard_normal((count, self.p))
            ) / np.sqrt(2.0)
        A_cl = self.closed_loop_A
        eta = np.zeros(self.order, dtype=np.complex128)
        U = np.empty((count, self.p), dtype=np.complex128)
        for k in range(count):
            U[k] = self.C_n @ eta + self.P @ w[k]
            eta = A_cl @ eta + self.B_n @ (self.P @ w[k])
        return U

    def output_autocorrelation(self, N):
        """Exact R_uu(m), |m| <= N, via the steady-state Lyapunov solution."""
        A_cl = self.closed_loop_A
        omega = self.Omega_r
        if self.order == 0:
            R_pos = np.zeros((N + 1, self.p, self.p), dtype=np.complex128)
            R_pos[0] = omega
            return CorrelationSequence.from_nonnegative_lags(R_pos)
        Q = self.B_n @ omega @ self.B_n.conj().T
        Sigma = scipy.linalg.solve_discrete_lyapunov(A_cl, Q)
        R_pos = np.empty((N + 1, self.p, self.p), dtype=np.complex128)
        R_pos[0] = hermitian_part(self.C_n @ Sigma @ self.C_n.conj().T + omega)
        # R(m) = C Sigma (A_cl*)^m C* + Omega_r B* (A_cl*)^(m-1) C*,  m >= 1
        Astar_pow = np.eye(self.order, dtype=np.complex128)
        for m in range(1, N + 1):
            R_pos[m] = (
                self.C_n @ Sigma @ A_cl.conj().T @ Astar_pow @ self.C_n.conj().T
                + omega @ self.B_n.conj().T @ Astar_pow @ self.C_n.conj().T
            )
            Astar_pow = Astar_pow @ A_cl.conj().T
        return CorrelationSequence.from_nonnegative_lags(R_pos)

    def to_json(self):
        return {
            "A_n": matrix_to_json(self.A_n),
            "B_n": matrix_to_json(self.B_n),
            "C_n": matrix_to_json(self.C_n),
            "P": matrix_to_json(self.P),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            A_n=matrix_from_json(obj["A_n"]),
            B_n=matrix_from_json(obj["B_n"]),
            C_n=matrix_from_json(obj["C_n"]),
            P=matrix_from_json(obj["P"]),
        )


def ar_autocorrelation(model, N):
    """Autocorrelation sequence implied by an AR model, via its companion form."""
    p = model.p
    F = companion_matrix(model.coeffs)
    if F.shape[0] == 0:
        R_pos = np.zeros((N + 1, p, p), dtype=np.complex128)
        R_pos[0] = model.Omega_r
        return CorrelationSequence.from_nonnegative_lags(R_pos)
    Q = np.zeros_like(F)
    Q[:p, :p] = model.Omega_r
    Pi = scipy.linalg.solve_discrete_lyapunov(F, Q)
    R_pos = np.empty((N + 1, p, p), dtype=np.complex128)
    block = Pi.copy()
    R_pos[0] = hermitian_part(Pi[:p, :p])
    for m in range(1, N + 1):
        block = block @ F.conj().T
        R_pos[m] = block[:p, :p]
    return CorrelationSequence.from_nonnegative_lags(R_pos)


def cholesky_factor(Omega_r):
    """Lower-triangular P with P P* = Omega_r, with one jitter rescue."""
    omega = hermitian_part(np.asarray(Omega_r, dtype=np.complex128))
    p = omega.shape[0]
    try:
        return np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        jitter = CHOLESKY_JITTER * max(np.trace(omega).real, 1e-300) / max(p, 1)
        try:
            return np.linalg.cholesky(omega + jitter * np.eye(p))
        except np.linalg.LinAlgError as exc:
            raise RealizationError(
                "residual covariance is not positive definite, even after jitter"
            ) from exc


def realize_innovations(model, era_order="auto", hankel_blocks=None):
    """Balanced realization of the fitted AR model as an innovations model.

    Realizes the closed-loop impulse response, recovers the open-loop
    A_n = A_cl - B_n C_n, and whitens the residual through its Cholesky
    factor.
    """
    if hankel_blocks is None:
        hankel_blocks = max(2 * model.order, 20)
    hhat = closed_loop_markov(model, 2 * hankel_blocks)
    realization = era(hhat, alpha=hankel_blocks, beta=hankel_blocks, order=era_order)
    A_cl, B_n, C_n = realization.A, realization.B, realization.C
    rho = spectral_radius(A_cl)
    if rho >= 1.0 - STATIONARY_TOL:
        raise RealizationError(
            f"realized closed-loop matrix is unstable (spectral radius {rho:.6f})"
        )
    P = cholesky_factor(model.Omega_r)
    return InnovationsModel(A_n=A_cl - B_n @ C_n, B_n=B_n, C_n=C_n, P=P)
