"""State-space realization: Hankel-SVD identification and snapshot-based
balanced model reduction."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InsufficientDataError
from .lti import MarkovSequence, matrix_from_json, matrix_to_json

# Relative singular-value cutoff for automatic order selection.
SV_RTOL = 1e-8
# Snapshot collection stops once the state norm decays this far below its
# peak, capped at DEFAULT_SNAPSHOT_CAP steps.
SNAPSHOT_DECAY = 1e-8
DEFAULT_SNAPSHOT_CAP = 2000
MAX_SNAPSHOT_COLUMNS = 4000


@dataclass(frozen=True)
class StateSpaceRealization:
    """Realized (A, B, C) triple with the retained Hankel singular values."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    singular_values: np.ndarray
    truncated: bool = field(default=False)

    def __post_init__(self):
        for name in ("A", "B", "C"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        sv = np.asarray(self.singular_values, dtype=np.float64)
        if sv.shape[0] != self.A.shape[0]:
            raise ValueError("retained singular values must match the state count")
        if sv.size and (np.any(sv <= 0) or np.any(np.diff(sv) > 0)):
            raise ValueError("singular values must be positive and non-increasing")
        object.__setattr__(self, "singular_values", sv)
        sv.setflags(write=False)

    @property
    def order(self):
        return self.A.shape[0]

    def markov_parameters(self, count):
        """Impulse response C A^{i-1} B for i = 1..count."""
        q, p = self.C.shape[0], self.B.shape[1]
        h = np.empty((count, q, p), dtype=np.complex128)
        X = self.B.copy()
        for i in range(count):
            h[i] = self.C @ X
            if i < count - 1:
                X = self.A @ X
        return MarkovSequence(h=h)

    def to_json(self):
        return {
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "C": matrix_to_json(self.C),
            "singular_values": [float(s) for s in self.singular_values],
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            A=matrix_from_json(obj["A"]),
            B=matrix_from_json(obj["B"]),
            C=matrix_from_json(obj["C"]),
            singular_values=np.asarray(obj["singular_values"], dtype=np.float64),
        )


@dataclass(frozen=True)
class BpodBasis:
    """Bi-orthogonal projection pair: T_l* T_r = I."""

    T_r: np.ndarray
    T_l: np.ndarray

    def __post_init__(self):
        T_r = np.asarray(self.T_r, dtype=np.complex128)
        T_l = np.asarray(self.T_l, dtype=np.complex128)
        if T_r.shape != T_l.shape:
            raise ValueError("projection matrices must have equal shapes")
        r = T_r.shape[1]
        defect = np.linalg.norm(T_l.conj().T @ T_r - np.eye(r))
        if defect > 1e-8 * max(r, 1):
            raise ValueError(f"projection pair is not bi-orthogonal (defect {defect:.3e})")
        object.__setattr__(self, "T_r", T_r)
        object.__setattr__(self, "T_l", T_l)
        T_r.setflags(write=False)
        T_l.setflags(write=False)


def _block_hankel(h, alpha, beta, shift):
    q, p = h.q, h.p
    H = np.empty((alpha * q, beta * p), dtype=np.complex128)
    for i in range(alpha):
        for j in range(beta):
            H[i * q : (i + 1) * q, j * p : (j + 1) * p] = h[i + j + shift + 1]
    return H


def era(h, alpha, beta, order="auto"):
    """Realize a system from its impulse response via the Hankel SVD.

    Two nested block-Hankel matrices are built from the same sequence,
    H(1) being H(0) shifted by one block; the SVD of H(0) yields the
    balanced realization
    A = S^{-1/2} R* H(1) S' S^{-1/2}, with B and C read off the factors.
    """
    if h.M < alpha + beta:
        raise InsufficientDataError(
            f"need at least alpha+beta = {alpha + beta} impulse-response "
            f"matrices, got {h.M}"
        )
    q, p = h.q, h.p
    H0 = _block_hankel(h, alpha, beta, shift=0)
    H1 = _block_hankel(h, alpha, beta, shift=1)
    R, s, Vh = np.linalg.svd(H0, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > SV_RTOL * s[0]))
    truncated = False
    if order == "auto":
        r = rank
    else:
        r = int(order)
        if r < 0:
            raise ValueError("order must be non-negative")
        if r > rank:
            warnings.warn(
                f"requested order {r} exceeds numerical Hankel rank {rank}; truncating",
                RuntimeWarning,
            )
            r = rank
            truncated = True
    if r == 0:
        return StateSpaceRealization(
            A=np.zeros((0, 0)),
            B=np.zeros((0, p)),
            C=np.zeros((q, 0)),
            singular_values=np.zeros(0),
            truncated=truncated,
        )
    Rn = R[:, :r]
    Sn = Vh[:r].conj().T
    sr = np.sqrt(s[:r])
    A = (Rn.conj().T @ H1 @ Sn) / np.outer(sr, sr)
    B = (sr[:, None] * Sn.conj().T)[:, :p]
    C = (Rn * sr)[:q, :]
    return StateSpaceRealization(
        A=A, B=B, C=C, singular_values=s[:r], truncated=truncated
    )


def _impulse_snapshots(A, seeds, horizon, stride):
    """Columns A^k s for each seed column s, at k = 0, stride, 2*stride, ..."""
    # keep real arithmetic for real systems; the SVD is much cheaper
    dtype = np.result_type(A, seeds, np.float64)
    cols = []
    for j in range(seeds.shape[1]):
        x = seeds[:, j].astype(dtype)
        k = 0
        while k < horizon:
            cols.append(x)
            for _ in range(min(stride, horizon - k)):
                x = A @ x
            k += stride
    return np.column_stack(cols)


def _decay_horizon(A, seeds, cap):
    """Steps until the propagated seed norms fall below the decay cutoff."""
    x = seeds.astype(np.complex128)
    peak = np.linalg.norm(x)
    for k in range(1, cap + 1):
        x = A @ x
        norm = np.linalg.norm(x)
        peak = max(peak, norm)
        if norm <= SNAPSHOT_DECAY * peak:
            return k
    return cap


def bpod_reduce(sys, order, snapshot_count=None, max_columns=MAX_SNAPSHOT_COLUMNS):
    """Reduce a plant with primal/adjoint impulse snapshots.

    Primal snapshots propagate the columns of B through A; adjoint
    snapshots propagate the conjugated rows of C through A*.  The SVD of
    the cross Hankel Y* X gives the bi-orthogonal projection pair and the
    reduced (A_r, B_r, C_r).  Returns (realization, basis).
    """
    if order < 1:
        raise ValueError("reduced order must be >= 1")
    if snapshot_count is None:
        snapshot_count = max(
            _decay_horizon(sys.A, sys.B, DEFAULT_SNAPSHOT_CAP),
            _decay_horizon(sys.A.conj().T, sys.C.conj().T, DEFAULT_SNAPSHOT_CAP),
        )
    per_seed_cap = max(1, max_columns // max(sys.p, sys.q))
    stride = max(1, int(np.ceil(snapshot_count / per_seed_cap)))
    X = _impulse_snapshots(sys.A, sys.B, snapshot_count, stride)
    Y = _impulse_snapshots(sys.A.conj().T, sys.C.conj().T, snapshot_count, stride)
    if order > min(X.shape[1], Y.shape[1]):
        raise ValueError(
            f"order {order} exceeds snapshot count ({X.shape[1]} primal, "
            f"{Y.shape[1]} adjoint columns)"
        )
    H = Y.conj().T @ X
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    # modes with singular values below sqrt(eps) of the peak produce an
    # ill-conditioned projection pair (the 1/sqrt(s) scaling amplifies
    # rounding noise past the bi-orthogonality tolerance), so cap there
    if s.size and s[0] > 0:
        rank = int(np.sum(s > np.sqrt(np.finfo(np.float64).eps) * s[0]))
    else:
        rank = 0
    truncated = False
    r = order
    if r > rank:
        warnings.warn(
            f"requested order {r} exceeds numerical Hankel rank {rank}; truncating",
            RuntimeWarning,
        )
        r = rank
        truncated = True
    U1 = U[:, :r]
    V1 = Vh[:r].conj().T
    sr_inv = 1.0 / np.sqrt(s[:r])
    T_r = X @ (V1 * sr_inv)
    T_l = Y @ (U1 * sr_inv)
    basis = BpodBasis(T_r=T_r, T_l=T_l)
    realization = StateSpaceRealization(
        A=T_l.conj().T @ sys.A @ T_r,
        B=T_l.conj().T @ sys.B,
        C=sys.C @ T_r,
        singular_values=s[:r],
        truncated=truncated,
    )
    return realization, basis
