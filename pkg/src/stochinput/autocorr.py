"""Matrix-valued autocorrelation sequences of wide-sense-stationary data.

A sequence stores R(m) = E[z_k z_{k+m}*] for lags m in [-N, N] and always
satisfies the conjugate symmetry R(-m) = R(m)*.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError
from .lti import hermitian_part

# Lags whose true norm falls below this are excluded from relative-error
# aggregates and reported as absolute errors instead.
ZERO_LAG_NORM = 1e-12


@dataclass(frozen=True)
class CorrelationSequence:
    """Family of d x d matrices R(m), m in [-N, N], stored as (2N+1, d, d)."""

    R: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.complex128)
        if R.ndim != 3 or R.shape[1] != R.shape[2]:
            raise ValueError(f"R must have shape (2N+1, d, d), got {R.shape}")
        if R.shape[0] % 2 != 1:
            raise ValueError("lag axis must have odd length 2N+1")
        scale = max(np.linalg.norm(R), 1.0)
        sym_defect = np.linalg.norm(R - R[::-1].conj().transpose(0, 2, 1))
        if sym_defect > 1e-8 * scale:
            raise ValueError(
                f"conjugate symmetry R(-m) = R(m)* violated (defect {sym_defect:.3e})"
            )
        object.__setattr__(self, "R", R)
        R.setflags(write=False)

    @property
    def dim(self):
        return self.R.shape[1]

    @property
    def N(self):
        return (self.R.shape[0] - 1) // 2

    @property
    def lags(self):
        return np.arange(-self.N, self.N + 1)

    def __getitem__(self, m):
        if abs(m) > self.N:
            raise IndexError(f"lag {m} outside [-{self.N}, {self.N}]")
        return self.R[self.N + m]

    @classmethod
    def from_nonnegative_lags(cls, R_pos):
        """Build from R(0), R(1), ..., R(N); negative lags by symmetry."""
        R_pos = np.asarray(R_pos, dtype=np.complex128)
        neg = R_pos[1:][::-1].conj().transpose(0, 2, 1)
        return cls(R=np.concatenate([neg, R_pos]))

    @classmethod
    def symmetrized(cls, R_full):
        """Average R(m) with R(-m)* to enforce the symmetry invariant."""
        R_full = np.asarray(R_full, dtype=np.complex128)
        mirror = R_full[::-1].conj().transpose(0, 2, 1)
        return cls(R=0.5 * (R_full + mirror))

    def truncated(self, N):
        """Restrict to lags [-N, N]."""
        if N > self.N:
            raise ValueError(f"cannot extend lag range {self.N} to {N}")
        c = self.N
        return CorrelationSequence(R=self.R[c - N : c + N + 1])

    def max_norm(self):
        return float(np.max(np.linalg.norm(self.R, axis=(1, 2))))

    def write_csv(self, path):
        """Columns: lag, row, col, re, im."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "row", "col", "re", "im"])
            for m in self.lags:
                block = self[m]
                for i in range(self.dim):
                    for j in range(self.dim):
                        v = block[i, j]
                        writer.writerow([m, i, j, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def read_csv(cls, path):
        entries = {}
        dim = 0
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                m = int(rec["lag"])
                i, j = int(rec["row"]), int(rec["col"])
                entries[(m, i, j)] = float(rec["re"]) + 1j * float(rec["im"])
                dim = max(dim, i + 1, j + 1)
        N = max(abs(m) for m, _, _ in entries)
        R = np.zeros((2 * N + 1, dim, dim), dtype=np.complex128)
        for (m, i, j), v in entries.items():
            R[N + m, i, j] = v
        return cls(R=R)


def sample_autocorrelation(data, N):
    """Biased estimator R(m) = (1/T) sum_{k} z_k z_{k+m}* for m = 0..N.

    The 1/T normalization keeps the estimated sequence positive
    semidefinite, which stabilizes the downstream least squares.
    """
    Z = np.atleast_2d(np.asarray(data, dtype=np.complex128))
    T, d = Z.shape
    if T <= N:
        raise InsufficientDataError(f"need more than N={N} samples, got T={T}")
    R_pos = np.empty((N + 1, d, d), dtype=np.complex128)
    for m in range(N + 1):
        R_pos[m] = Z[: T - m].T @ Z[m:].conj() / T
    R_pos[0] = hermitian_part(R_pos[0])
    return CorrelationSequence.from_nonnegative_lags(R_pos)


def subtract_noise_floor(Ryy, Omega):
    """Remove the white measurement-noise contribution at lag zero."""
    Omega = np.asarray(Omega, dtype=np.complex128)
    if Omega.shape != (Ryy.dim, Ryy.dim):
        raise ValueError(f"Omega must be {Ryy.dim}x{Ryy.dim}, got {Omega.shape}")
    R = Ryy.R.copy()
    R[Ryy.N] = R[Ryy.N] - Omega
    return CorrelationSequence(R=R)


@dataclass(frozen=True)
class LagErrors:
    """Per-lag comparison of two sequences.

    ``relative`` holds Frobenius-relative errors; where the reference norm
    is (numerically) zero the entry is the absolute error instead and the
    corresponding ``absolute_flag`` is set.
    """

    lags: np.ndarray
    relative: np.ndarray
    absolute_flag: np.ndarray

    def max_relative(self):
        vals = self.relative[~self.absolute_flag]
        return float(np.max(vals)) if vals.size else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "error", "is_absolute"])
            for m, e, f in zip(self.lags, self.relative, self.absolute_flag):
                writer.writerow([int(m), repr(float(e)), int(f)])


def relative_error(R_true, R_est):
    """Per-lag ||R_true(m) - R_est(m)||_F / ||R_true(m)||_F over shared lags."""
    if R_true.dim != R_est.dim:
        raise ValueError("sequences have different dimensions")
    N = min(R_true.N, R_est.N)
    lags = np.arange(-N, N + 1)
    rel = np.empty(lags.shape)
    flags = np.zeros(lags.shape, dtype=bool)
    for idx, m in enumerate(lags):
        ref = np.linalg.norm(R_true[m])
        err = np.linalg.norm(R_true[m] - R_est[m])
        if ref < ZERO_LAG_NORM:
            rel[idx] = err
            flags[idx] = True
        else:
            rel[idx] = err / ref
    return LagErrors(lags=lags, relative=rel, absolute_flag=flags)
