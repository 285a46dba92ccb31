"""Dense Hermitian matrix algebra.

Matrices are plain ``complex128`` numpy arrays. ``hermitian`` validates and
symmetrizes its input and returns a read-only array; every other routine
accepts anything ``hermitian`` accepts.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from . import _backend

HERMITIAN_TOL = 1e-12
ENTROPY_NEG_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


class DomainError(ValueError):
    """An eigenvalue falls outside the domain of a scalar function."""

    def __init__(self, eigenvalue, domain):
        self.eigenvalue = eigenvalue
        self.domain = domain
        super().__init__(f"eigenvalue {eigenvalue!r} outside domain {domain}")


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    unitary: np.ndarray


class Interval(NamedTuple):
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    def __contains__(self, x):
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return bool(above and below)

    def __str__(self):
        return (("[" if self.lo_closed else "(") + f"{self.lo}, {self.hi}"
                + ("]" if self.hi_closed else ")"))


REALS = Interval()
POSITIVE = Interval(0.0, math.inf, False, True)
NONNEGATIVE = Interval(0.0, math.inf, True, True)


def _freeze(a):
    a.setflags(write=False)
    return a


def hermiticity_residual(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``a`` as a Hermitian matrix and return the symmetrized copy.

    Rejects non-square, empty or non-finite input and any per-entry
    hermiticity residual above ``tol``.
    """
    a = np.array(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotHermitianError(f"expected a square matrix of dimension >= 1, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    res = hermiticity_residual(a)
    if res > tol:
        raise NotHermitianError(f"hermiticity residual {res:.3g} exceeds tolerance {tol:.3g}")
    return _freeze((a + a.conj().T) / 2)


def general(b) -> np.ndarray:
    b = np.array(b, dtype=np.complex128)
    if b.ndim != 2 or min(b.shape) < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("matrix has non-finite entries")
    return _freeze(b)


def eig_hermitian(a) -> EigenDecomposition:
    w, q = _backend.eigh(hermitian(a))
    return EigenDecomposition(_freeze(w), _freeze(q))


def eigvalsh(a) -> np.ndarray:
    return eig_hermitian(a).eigenvalues


def eigvalsh_batch(stack) -> np.ndarray:
    """Ascending eigenvalues of an ``(m, d, d)`` stack of Hermitian matrices.

    The stack is assumed Hermitian (it is produced internally); no checks.
    """
    stack = np.ascontiguousarray(stack, dtype=np.complex128)
    if stack.shape[0] == 0:
        return np.empty((0, stack.shape[1]))
    return _backend.eigvalsh_batch(stack)


def lambda_max(a) -> float:
    return float(eigvalsh(a)[-1])


def lambda_min(a) -> float:
    return float(eigvalsh(a)[0])


def matrix_function(a, f: Callable, domain: Interval = REALS) -> np.ndarray:
    """Standard matrix function ``Q diag(f(lambda)) Q*``.

    ``f`` is applied to the eigenvalue array and must accept numpy arrays.
    """
    w, q = eig_hermitian(a)
    for lam in w:
        if lam not in domain:
            raise DomainError(float(lam), domain)
    fw = np.asarray(f(w), dtype=np.float64)
    return _freeze(hermitian((q * fw) @ q.conj().T, tol=1e-8 * (1 + np.max(np.abs(fw)))))


def expm(a, theta: float = 1.0) -> np.ndarray:
    return matrix_function(a, lambda w: np.exp(theta * w))


def mabs(a) -> np.ndarray:
    return matrix_function(a, np.abs)


def msqrt(a, tol: float = 1e-10) -> np.ndarray:
    """Square root of a psd matrix; eigenvalues above ``-tol`` are clipped to zero."""
    return matrix_function(a, lambda w: np.sqrt(np.clip(w, 0.0, None)), Interval(-tol, math.inf))


def mpow_abs(a, power: float) -> np.ndarray:
    return matrix_function(a, lambda w: np.abs(w) ** power)


def singular_values(b) -> np.ndarray:
    """Descending singular values, read off the Hermitian dilation's spectrum."""
    b = general(b)
    k = min(b.shape)
    w = eigvalsh(hermitian_dilation(b))
    return np.clip(w[::-1][:k], 0.0, None)


def _is_hermitian(a) -> bool:
    return a.shape[0] == a.shape[1] and hermiticity_residual(a) <= HERMITIAN_TOL


def schatten_norm(a, p: float) -> float:
    """Schatten ``p``-norm; ``p=math.inf`` is the spectral norm."""
    if not (p >= 1):
        raise ValueError(f"Schatten index must be >= 1 or inf, got {p}")
    a = general(a)
    if _is_hermitian(a):
        sv = np.abs(eigvalsh(a))
    else:
        sv = singular_values(a)
    if math.isinf(p):
        return float(np.max(sv))
    top = float(np.max(sv))
    if top == 0.0:
        return 0.0
    # scale to dodge overflow at large p
    return top * float(np.sum((sv / top) ** p)) ** (1.0 / p)


def spectral_norm(a) -> float:
    return schatten_norm(a, math.inf)


def traces(a) -> tuple[float, float]:
    """Trace and normalized trace; the diagonal's imaginary residue is dropped."""
    a = hermitian(a)
    tr = float(np.sum(np.diag(a)).real)
    return tr, tr / a.shape[0]


def ntrace(a) -> float:
    return traces(a)[1]


def psd_leq(a, b, tol: float = 0.0) -> bool:
    """Semidefinite order test ``a <= b``: ``lambda_min(b - a) >= -tol``."""
    a = hermitian(a)
    b = hermitian(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return lambda_min(b - a) >= -tol


def is_psd(a, tol: float = 1e-10) -> bool:
    return lambda_min(a) >= -tol


def hermitian_dilation(b) -> np.ndarray:
    """The block matrix ``[[0, B], [B*, 0]]``."""
    b = general(b)
    d1, d2 = b.shape
    out = np.zeros((d1 + d2, d1 + d2), dtype=np.complex128)
    out[:d1, d1:] = b
    out[d1:, :d1] = b.conj().T
    return _freeze(out)


def entropy_term(w_mat) -> float:
    """Normalized-trace entropy ``tr-bar(W log W)`` with ``0 log 0 = 0``."""
    lam = eigvalsh(w_mat)
    if lam[0] < -ENTROPY_NEG_TOL:
        raise DomainError(float(lam[0]), NONNEGATIVE)
    lam = np.clip(lam, 0.0, None)
    pos = lam > 0
    return float(np.sum(lam[pos] * np.log(lam[pos]))) / lam.size


def log_ntrace_exp(a, theta: float = 1.0) -> float:
    """``log tr-bar exp(theta a)`` without overflow."""
    lam = theta * eigvalsh(a)
    top = float(np.max(lam))
    return top + math.log(float(np.mean(np.exp(lam - top))))
