"""Recover input autocorrelations from output autocorrelations.

The truncated input/output relationship

    vec(Ryy_hat(m)) = sum_{i,j <= M, |m+i-j| <= N_i} (conj(h_j) kron h_i)
                      vec(Ruu(m+i-j)),   |m| <= N_o,

stacks into one structured linear system whose coefficient matrix is
block Toeplitz: block (m, l) depends only on d = l - m.  The system is
solved for vec(Ruu) either by dense QR least squares or by conjugate
gradients on the normal equations, applied matrix free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .autocorr import CorrelationSequence
from .exceptions import ConvergenceError, IllPosedError

DEFAULT_MEMORY_BUDGET = int(2e8)  # max dense entries of the coefficient matrix
CG_TOL = 1e-10


def vec(X):
    """Column-stacking vectorization: vec(X) = (x_1; x_2; ...)."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(x, rows, cols):
    return np.asarray(x).reshape(rows, cols, order="F")


def kronecker(A, B):
    """Kronecker product with block (i, j) equal to a_ij * B."""
    return np.kron(np.asarray(A), np.asarray(B))


@dataclass(frozen=True)
class CoefficientMatrix:
    """Structured map from input to output autocorrelations.

    ``diag_blocks[d]`` holds the q^2 x p^2 block shared by every (output
    lag m, input lag l) pair with l - m = d, for |d| <= N_i + N_o.  The
    dense matrix is materialized only when it fits the entry budget.
    """

    diag_blocks: np.ndarray
    M: int
    N_i: int
    N_o: int
    p: int
    q: int
    dense: np.ndarray | None = field(default=None, repr=False)
    min_singular_value: float | None = None
    max_singular_value: float | None = None

    @property
    def shape(self):
        return (self.q**2 * (2 * self.N_o + 1), self.p**2 * (2 * self.N_i + 1))

    def block(self, m, l):
        """Coefficient block mapping vec(Ruu(l)) into vec(Ryy_hat(m))."""
        d = l - m
        if abs(d) > self.N_i + self.N_o:
            return np.zeros((self.q**2, self.p**2), dtype=np.complex128)
        return self.diag_blocks[self.N_i + self.N_o + d]

    def matvec(self, x):
        q2, p2 = self.q**2, self.p**2
        X = x.reshape(2 * self.N_i + 1, p2)
        out = np.zeros((2 * self.N_o + 1, q2), dtype=np.complex128)
        for li, l in enumerate(range(-self.N_i, self.N_i + 1)):
            for mi, m in enumerate(range(-self.N_o, self.N_o + 1)):
                d = l - m
                if abs(d) <= self.N_i + self.N_o:
                    out[mi] += self.diag_blocks[self.N_i + self.N_o + d] @ X[li]
        return out.reshape(-1)

    def rmatvec(self, y):
        q2, p2 = self.q**2, self.p**2
        Y = y.reshape(2 * self.N_o + 1, q2)
        out = np.zeros((2 * self.N_i + 1, p2), dtype=np.complex128)
        for li, l in enumerate(range(-self.N_i, self.N_i + 1)):
            for mi, m in enumerate(range(-self.N_o, self.N_o + 1)):
                d = l - m
                if abs(d) <= self.N_i + self.N_o:
                    out[li] += self.diag_blocks[self.N_i + self.N_o + d].conj().T @ Y[mi]
        return out.reshape(-1)

    def normal_matvec(self, x):
        """Apply C* C without materializing the normal matrix."""
        if self.dense is not None:
            return self.dense.conj().T @ (self.dense @ x)
        return self.rmatvec(self.matvec(x))

    def to_dense(self):
        if self.dense is not None:
            return self.dense
        q2, p2 = self.q**2, self.p**2
        rows, cols = self.shape
        C = np.zeros((rows, cols), dtype=np.complex128)
        for mi in range(2 * self.N_o + 1):
            for li in range(2 * self.N_i + 1):
                d = (li - self.N_i) - (mi - self.N_o)
                C[mi * q2 : (mi + 1) * q2, li * p2 : (li + 1) * p2] = self.diag_blocks[
                    self.N_i + self.N_o + d
                ]
        return C

    def condition(self):
        if self.min_singular_value is None or self.min_singular_value == 0.0:
            return np.inf
        return self.max_singular_value / self.min_singular_value

    def forward(self, Ruu):
        """Map an input autocorrelation sequence to the implied Ryy_hat."""
        if Ruu.N != self.N_i or Ruu.dim != self.p:
            raise ValueError(
                f"input sequence must cover lags +-{self.N_i} with dim {self.p}"
            )
        x = np.concatenate([vec(Ruu[l]) for l in range(-self.N_i, self.N_i + 1)])
        y = self.matvec(x)
        q2 = self.q**2
        blocks = [
            unvec(y[i * q2 : (i + 1) * q2], self.q, self.q)
            for i in range(2 * self.N_o + 1)
        ]
        return CorrelationSequence.symmetrized(np.stack(blocks))


def build_coefficient_matrix(
    h,
    N_i,
    N_o,
    memory_budget=DEFAULT_MEMORY_BUDGET,
    check_rank=True,
):
    """Assemble the coefficient matrix from a Markov-parameter sequence.

    ``N_i <= N_o`` is required: input correlations outside the output lag
    window cannot be observed, so the window ordering must hold.
    """
    if N_i > N_o:
        raise ValueError(
            f"input lag window N_i={N_i} must not exceed output window N_o={N_o}"
        )
    M, q, p = h.M, h.q, h.p
    hm = h.h
    span = N_i + N_o
    blocks = np.zeros((2 * span + 1, q * q, p * p), dtype=np.complex128)
    # diagonal block for offset d = i - j: sum_j conj(h_j) kron h_{j+d}
    for d in range(-span, span + 1):
        if abs(d) >= M:
            continue
        j0 = max(0, -d)
        j1 = M - max(0, d)
        hj = hm[j0:j1].conj()
        hi = hm[j0 + d : j1 + d]
        blocks[span + d] = np.einsum("jab,jcd->acbd", hj, hi).reshape(q * q, p * p)

    rows, cols = q**2 * (2 * N_o + 1), p**2 * (2 * N_i + 1)
    dense = None
    smin = smax = None
    cm = CoefficientMatrix(diag_blocks=blocks, M=M, N_i=N_i, N_o=N_o, p=p, q=q)
    if rows * cols <= memory_budget:
        dense = cm.to_dense()
        if check_rank:
            s = np.linalg.svd(dense, compute_uv=False)
            smax = float(s[0])
            smin = float(s[-1])
            tol = max(rows, cols) * np.finfo(np.float64).eps * smax
            if smin <= tol:
                raise IllPosedError(
                    "coefficient matrix is numerically rank deficient",
                    condition=np.inf if smin == 0 else smax / smin,
                )
    return CoefficientMatrix(
        diag_blocks=blocks,
        M=M,
        N_i=N_i,
        N_o=N_o,
        p=p,
        q=q,
        dense=dense,
        min_singular_value=smin,
        max_singular_value=smax,
    )


def conjugate_gradient_solve(Cs, Ls, x0=None, tol=CG_TOL, max_iter=None):
    """Conjugate gradients for the Hermitian system Cs x = Ls.

    ``Cs`` is a matrix or a callable applying it.  Stops when
    ||r||_2 <= tol * ||Ls||_2; raises if the iteration budget runs out.
    Returns (solution, residual_history).
    """
    apply_cs = Cs if callable(Cs) else (lambda v: Cs @ v)
    Ls = np.asarray(Ls, dtype=np.complex128)
    n = Ls.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    b_norm = np.linalg.norm(Ls)
    if b_norm == 0.0:
        return np.zeros(n, dtype=np.complex128), [0.0]
    r = Ls - apply_cs(x)
    pdir = r.copy()
    rs = np.vdot(r, r)
    history = [float(np.sqrt(rs.real))]
    for _ in range(max_iter):
        if np.sqrt(rs.real) <= tol * b_norm:
            return x, history
        Cp = apply_cs(pdir)
        denom = np.vdot(pdir, Cp)
        if denom == 0:
            raise ConvergenceError(
                "conjugate gradient breakdown: zero curvature direction",
                residual=float(np.sqrt(rs.real)),
            )
        alpha = rs / denom
        x = x + alpha * pdir
        r = r - alpha * Cp
        rs_next = np.vdot(r, r)
        beta = rs_next / rs
        pdir = r + beta * pdir
        rs = rs_next
        history.append(float(np.sqrt(rs.real)))
    if np.sqrt(rs.real) <= tol * b_norm:
        return x, history
    raise ConvergenceError(
        f"conjugate gradient did not converge in {max_iter} iterations",
        residual=float(np.sqrt(rs.real) / b_norm),
        iterations=max_iter,
    )


def solve_input_autocorr(Cm, Ryy_hat, method="direct", tol=CG_TOL, max_iter=None):
    """Least-squares recovery of the input autocorrelation sequence.

    Returns ``(Ruu, info)`` where Ruu covers lags [-N_i, N_i] and is
    symmetrized to satisfy R(-m) = R(m)*.  ``info`` records the residual,
    the pre-symmetrization defect, and solver diagnostics.
    """
    if Ryy_hat.N < Cm.N_o:
        raise ValueError(
            f"output sequence must cover lags +-{Cm.N_o}, has +-{Ryy_hat.N}"
        )
    if Ryy_hat.dim != Cm.q:
        raise ValueError(f"output sequence dim {Ryy_hat.dim} != q={Cm.q}")
    Ryy_hat = Ryy_hat.truncated(Cm.N_o)
    b = np.concatenate([vec(Ryy_hat[m]) for m in range(-Cm.N_o, Cm.N_o + 1)])
    info = {"method": method}
    if method == "direct":
        dense = Cm.dense
        if dense is None:
            raise IllPosedError(
                "direct solve requires the materialized coefficient matrix; "
                "raise the memory budget or use method='cg'"
            )
        x, _, rank, _ = scipy.linalg.lstsq(dense, b, lapack_driver="gelsy")
        if rank < dense.shape[1]:
            raise IllPosedError(
                "coefficient matrix is rank deficient in the least squares solve",
                condition=Cm.condition(),
            )
        info["condition"] = Cm.condition()
    elif method == "cg":
        Ls = Cm.rmatvec(b)
        x, history = conjugate_gradient_solve(
            Cm.normal_matvec, Ls, tol=tol, max_iter=max_iter
        )
        info["iterations"] = len(history) - 1
        info["residual_history"] = history
    else:
        raise ValueError(f"unknown method {method!r}; expected 'direct' or 'cg'")

    p2 = Cm.p**2
    raw = np.stack(
        [
            unvec(x[i * p2 : (i + 1) * p2], Cm.p, Cm.p)
            for i in range(2 * Cm.N_i + 1)
        ]
    )
    Ruu = CorrelationSequence.symmetrized(raw)
    info["residual"] = float(np.linalg.norm(Cm.matvec(x) - b))
    info["symmetry_defect"] = float(np.linalg.norm(raw - Ruu.R))
    return Ruu, info
