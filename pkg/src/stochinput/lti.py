"""Complex-valued discrete-time LTI systems and their impulse-response data.

The plant is ``x_k = A x_{k-1} + B u_{k-1}``, ``y_k = C x_k + v_k`` with
measurement noise covariance ``Omega``.  Real systems are represented with
zero imaginary parts; everything downstream works in complex double
precision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Spectral radius must clear 1 by this margin so that truncated infinite
# sums (Markov tails, steady-state covariances) remain well conditioned.
STABILITY_MARGIN = 1e-9


def as_complex_matrix(value, name="matrix"):
    """Coerce to a 2-D complex128 ndarray, rejecting anything else."""
    arr = np.asarray(value, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def hermitian_part(M):
    return 0.5 * (M + M.conj().T)


def is_hermitian(M, rtol=1e-10):
    scale = max(np.linalg.norm(M), 1.0)
    return np.linalg.norm(M - M.conj().T) <= rtol * scale


def spectral_radius(A):
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def numerical_rank(M):
    """Rank by singular values with the standard max(dim)*eps*sigma_max cut."""
    if min(M.shape) == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * np.finfo(np.float64).eps * s[0]
    return int(np.sum(s > tol))


def matrix_to_json(M):
    """Encode a complex matrix as nested [re, im] pairs."""
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.atleast_2d(M)]


def matrix_from_json(obj):
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("expected a nested [[re, im], ...] matrix encoding")
    return (arr[..., 0] + 1j * arr[..., 1]).astype(np.complex128)


def gaussian_vectors(rng, cov, count):
    """Draw ``count`` zero-mean Gaussian vectors with covariance ``cov``.

    Real covariance yields real samples; a complex covariance yields
    circularly-symmetric complex samples with E[v v*] = cov.
    """
    cov = np.atleast_2d(np.asarray(cov))
    d = cov.shape[0]
    if d == 0 or not np.any(cov):
        dtype = np.complex128 if np.iscomplexobj(cov) else np.float64
        return np.zeros((count, d), dtype=dtype)
    w, V = np.linalg.eigh(hermitian_part(cov.astype(np.complex128)))
    w = np.clip(w, 0.0, None)
    shaper = V * np.sqrt(w)
    if np.iscomplexobj(np.asarray(cov)) and np.linalg.norm(np.asarray(cov).imag) > 0:
        z = (rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d)))
        z /= np.sqrt(2.0)
        return z @ shaper.conj().T
    z = rng.standard_normal((count, d))
    return z @ shaper.real.T


@dataclass(frozen=True)
class LtiSystem:
    """Known plant ``(A, B, C)`` with measurement-noise covariance ``Omega``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Omega: np.ndarray

    def __post_init__(self):
        A = as_complex_matrix(self.A, "A")
        B = as_complex_matrix(self.B, "B")
        C = as_complex_matrix(self.C, "C")
        Omega = as_complex_matrix(self.Omega, "Omega")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        q = C.shape[0]
        if Omega.shape != (q, q):
            raise ValueError(f"Omega must be {q}x{q}, got {Omega.shape}")
        if not is_hermitian(Omega, rtol=1e-8):
            raise ValueError("Omega must be Hermitian")
        if np.any(np.linalg.eigvalsh(hermitian_part(Omega)) < -1e-10 * max(np.linalg.norm(Omega), 1.0)):
            raise ValueError("Omega must be positive semidefinite")
        for name, val in (("A", A), ("B", B), ("C", C), ("Omega", hermitian_part(Omega))):
            object.__setattr__(self, name, val)
            val.setflags(write=False)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.C.shape[0]

    @property
    def is_real(self):
        return all(
            np.linalg.norm(M.imag) == 0.0 for M in (self.A, self.B, self.C, self.Omega)
        )

    def spectral_radius(self):
        return spectral_radius(self.A)

    def to_json(self):
        return {
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "C": matrix_to_json(self.C),
            "Omega": matrix_to_json(self.Omega),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            A=matrix_from_json(obj["A"]),
            B=matrix_from_json(obj["B"]),
            C=matrix_from_json(obj["C"]),
            Omega=matrix_from_json(obj["Omega"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class MarkovSequence:
    """Ordered impulse-response matrices ``h_1 .. h_M`` of shape (q, p)."""

    h: np.ndarray
    tail_tolerance: float = field(default=float("inf"))

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        if h.ndim != 3:
            raise ValueError(f"h must have shape (M, q, p), got {h.shape}")
        if h.shape[0] < 1:
            raise ValueError("need at least one impulse-response matrix")
        tail = np.linalg.norm(h[-1])
        if tail > self.tail_tolerance:
            raise ValueError(
                f"last impulse-response norm {tail:.3e} exceeds declared "
                f"tail tolerance {self.tail_tolerance:.3e}"
            )
        object.__setattr__(self, "h", h)
        h.setflags(write=False)

    @property
    def M(self):
        return self.h.shape[0]

    @property
    def q(self):
        return self.h.shape[1]

    @property
    def p(self):
        return self.h.shape[2]

    def __getitem__(self, i):
        """1-based access: self[i] is h_i."""
        if not 1 <= i <= self.M:
            raise IndexError(f"index {i} outside 1..{self.M}")
        return self.h[i - 1]


def markov_parameters(sys, M, tail_tolerance=float("inf")):
    """First ``M`` impulse-response matrices h_i = C A^{i-1} B.

    Built by propagating the columns of B through A, never by forming an
    explicit matrix power.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    X = sys.B.copy()
    h = np.empty((M, sys.q, sys.p), dtype=np.complex128)
    for i in range(M):
        h[i] = sys.C @ X
        if i < M - 1:
            X = sys.A @ X
    return MarkovSequence(h=h, tail_tolerance=tail_tolerance)


def simulate(sys, inputs, noise_seed=0, x0=None):
    """Simulate outputs ``y_1 .. y_T`` for inputs ``u_0 .. u_{T-1}``.

    Measurement noise is drawn i.i.d. with covariance ``Omega`` from a
    generator seeded with ``noise_seed``; identical seed and input give
    identical output.
    """
    U = np.atleast_2d(np.asarray(inputs, dtype=np.complex128))
    if U.shape[1] != sys.p:
        raise ValueError(f"inputs must have {sys.p} columns, got {U.shape[1]}")
    T = U.shape[0]
    if T < 1:
        raise ValueError("need at least one input sample")
    x = np.zeros(sys.n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128)
    rng = np.random.default_rng(noise_seed)
    omega = sys.Omega if not sys.is_real else sys.Omega.real
    noise = gaussian_vectors(rng, omega, T)
    Y = np.empty((T, sys.q), dtype=np.complex128)
    for k in range(T):
        x = sys.A @ x + sys.B @ U[k]
        Y[k] = sys.C @ x + noise[k]
    return Y


@dataclass(frozen=True)
class AssumptionReport:
    """Pass/fail record of the structural conditions the recovery needs."""

    spectral_radius: float
    stable: bool
    rank_B: int
    rank_C: int
    rank_CAB: int
    rank_conditions_ok: bool
    detectable: bool

    @property
    def all_ok(self):
        return self.stable and self.rank_conditions_ok and self.detectable


def _detectable(A, C):
    """PBH test: every eigenvalue on or outside the unit circle is observable."""
    n = A.shape[0]
    eigvals = np.linalg.eigvals(A)
    for lam in eigvals:
        if abs(lam) < 1.0 - STABILITY_MARGIN:
            continue
        pencil = np.vstack([A - lam * np.eye(n), C])
        if numerical_rank(pencil) < n:
            return False
    return True


def check_assumptions(sys):
    """Report stability, the input/output rank conditions, and detectability."""
    rho = sys.spectral_radius()
    rank_B = numerical_rank(sys.B)
    rank_C = numerical_rank(sys.C)
    rank_CAB = numerical_rank(sys.C @ sys.A @ sys.B)
    ranks_ok = (
        rank_B == sys.p
        and rank_C == sys.q
        and sys.p <= sys.q
        and rank_CAB == sys.p
    )
    return AssumptionReport(
        spectral_radius=rho,
        stable=rho < 1.0 - STABILITY_MARGIN,
        rank_B=rank_B,
        rank_C=rank_C,
        rank_CAB=rank_CAB,
        rank_conditions_ok=ranks_ok,
        detectable=_detectable(sys.A, sys.C),
    )
