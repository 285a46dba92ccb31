"""Random Hermitian matrix ensembles over small discrete state spaces.

Each family stores its data as dense ``complex128`` arrays and represents a
realized auxiliary variable ("state") as one row of an integer array:

===========================  ==========================================
family                       state row
===========================  ==========================================
independent_sum              support index of each summand
rademacher_series            signs in {-1, +1}
modulated_series             ``[coefficient-tuple index, signs...]``
combinatorial_sum            permutation ``pi`` with ``pi[j]`` the image of ``j``
sampling_without_replacement permutation
permuted_inner_product       permutation
rademacher_chaos             signs in {-1, +1}
===========================  ==========================================

Batched evaluation maps an ``(m, k)`` state array to an ``(m, d, d)`` stack.
Sampling draws coordinates in ascending order; permutations come from a
Fisher-Yates shuffle run from the last position down.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg

SIGN_LIMIT = 2 ** 16
PERM_LIMIT = math.factorial(8)
CENTER_TOL = 1e-12
ZERO_SUM_TOL = 1e-10
TIE_TOL = 1e-10

FAMILIES = (
    "independent_sum",
    "rademacher_series",
    "modulated_series",
    "combinatorial_sum",
    "sampling_without_replacement",
    "permuted_inner_product",
    "rademacher_chaos",
)


class SpecError(ValueError):
    """Invalid ensemble specification; ``pointer`` locates the bad field (RFC 6901)."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class EnumerationLimitError(ValueError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"state space has {size} states, above the enumeration limit {limit}")


def _ptr(base, *parts):
    out = base
    for p in parts:
        out += "/" + str(p).replace("~", "~0").replace("/", "~1")
    return out


def _as_stack(mats, pointer, hermitian=True):
    """Validate a list of matrices into an ``(n, d, d)`` (or ``(n, r, c)``) array."""
    out = []
    shape = None
    for i, m in enumerate(mats):
        p = _ptr(pointer, i)
        try:
            a = linalg.hermitian(m) if hermitian else linalg.general(m)
        except ValueError as exc:
            raise SpecError(str(exc), p) from None
        if shape is not None and a.shape != shape:
            raise SpecError(f"shape {a.shape} differs from {shape}", p)
        shape = a.shape
        out.append(a)
    if not out:
        raise SpecError("needs at least one matrix", pointer)
    return np.stack(out)


def _signs(rng, m, n):
    return (2 * rng.integers(0, 2, size=(m, n)) - 1).astype(np.int64)


def _permutations(rng, m, n):
    perm = np.tile(np.arange(n, dtype=np.int64), (m, 1))
    rows = np.arange(m)
    for i in range(n - 1, 0, -1):
        j = rng.integers(0, i + 1, size=m)
        tmp = perm[rows, j].copy()
        perm[rows, j] = perm[:, i]
        perm[:, i] = tmp
    return perm


def _all_signs(n):
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int64).reshape(-1, n)


def _fmt(state):
    return "[" + ", ".join(str(int(s)) for s in state) + "]"


@dataclass(frozen=True)
class OutcomeTable:
    """Complete weighted outcome list of an enumerable ensemble."""

    states: np.ndarray
    xs: np.ndarray
    weights: np.ndarray
    _eig: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not math.isclose(math.fsum(self.weights), 1.0, abs_tol=1e-12):
            raise ValueError("outcome weights must sum to 1")
        if np.any(self.weights <= 0):
            raise ValueError("outcome weights must be positive")

    def __len__(self):
        return len(self.weights)

    @property
    def eigenvalues(self) -> np.ndarray:
        if "w" not in self._eig:
            self._eig["w"] = linalg.eigvalsh_batch(self.xs)
        return self._eig["w"]

    def expect(self, values) -> float:
        return math.fsum(np.asarray(values, dtype=np.float64) * self.weights)

    def mean_lambda_max(self) -> float:
        return self.expect(self.eigenvalues[:, -1])

    def tail(self, t: float) -> float:
        """``P(lambda_max >= t)``; eigenvalues within ``1e-10 max(1, |t|)`` below t count as ties."""
        hit = self.eigenvalues[:, -1] >= t - TIE_TOL * max(1.0, abs(t))
        return min(1.0, math.fsum(self.weights[hit]))

    def schatten_moment(self, p: float) -> float:
        """``E ||X||_p^p``."""
        return self.expect(np.sum(np.abs(self.eigenvalues) ** p, axis=1))

    def trace_mgf(self, theta: float) -> float:
        """``E tr-bar exp(theta X)``."""
        return self.expect(np.mean(np.exp(theta * self.eigenvalues), axis=1))

    def mean_matrix(self) -> np.ndarray:
        return np.tensordot(self.weights, self.xs, axes=1)


class Ensemble:
    """Base class. Subclasses set ``family``, ``n``, ``d`` and the hooks below."""

    family: str
    n: int
    d: int
    limit: int = SIGN_LIMIT

    # sampling and evaluation

    def sample_states(self, rng: np.random.Generator, m: int) -> np.ndarray:
        raise NotImplementedError

    def evaluate_batch(self, states) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, state) -> np.ndarray:
        return self.evaluate_batch(np.asarray(state)[None, :])[0]

    def sample(self, rng: np.random.Generator):
        state = self.sample_states(rng, 1)[0]
        return state, self.evaluate(state)

    # enumeration

    def state_space_size(self) -> int:
        raise NotImplementedError

    def _all_states(self):
        raise NotImplementedError

    def _state_weights(self, states):
        return np.full(len(states), 1.0 / len(states))

    def enumerable(self, limit: Optional[int] = None) -> bool:
        return self.state_space_size() <= (self.limit if limit is None else limit)

    def enumerate(self, limit: Optional[int] = None) -> OutcomeTable:
        limit = self.limit if limit is None else limit
        size = self.state_space_size()
        if size > limit:
            raise EnumerationLimitError(size, limit)
        states = self._all_states()
        return OutcomeTable(states, self.evaluate_batch(states), self._state_weights(states))

    # exchangeable pair

    alpha: float

    def replacements(self, state):
        """Full conditional law of ``Z'`` given ``Z = state`` as ``[(prob, state'), ...]``."""
        raise NotImplementedError

    def conditional_variance(self, state) -> np.ndarray:
        raise NotImplementedError

    def conditional_variance_batch(self, states) -> np.ndarray:
        return np.stack([self.conditional_variance(s) for s in np.asarray(states)])

    def coordinates(self) -> int:
        """Number of resampleable coordinates (0 for permutation families)."""
        return 0

    def coordinate_replacements(self, state, k):
        """Law of the state with coordinate ``k`` redrawn, as ``[(prob, state'), ...]``."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _mat_json(a):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


# sums of independent summands

class IndependentSum(Ensemble):
    """``X = sum_k Y_k`` with each ``Y_k`` drawn from a finite weighted support.

    Parameters
    ----------
    supports : list of list of (weight, matrix)
    check : bool
        Enforce exact centering. ``False`` is only for fault injection.
    """

    family = "independent_sum"

    def __init__(self, supports, check=True, _pointer="/supports"):
        if not supports:
            raise SpecError("needs at least one summand", _pointer)
        self.weights = []
        self.mats = []
        self.cum = []
        d = None
        for k, sup in enumerate(supports):
            p = _ptr(_pointer, k)
            if not sup:
                raise SpecError("empty support", p)
            w = np.array([float(x[0]) for x in sup])
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise SpecError("weights must be positive", p)
            if abs(math.fsum(w) - 1.0) > CENTER_TOL:
                raise SpecError(f"weights sum to {math.fsum(w)!r}, not 1", p)
            mats = _as_stack([x[1] for x in sup], p)
            if d is not None and mats.shape[1] != d:
                raise SpecError(f"dimension {mats.shape[1]} differs from {d}", p)
            d = mats.shape[1]
            if check:
                mean = np.tensordot(w, mats, axes=1)
                if np.max(np.abs(mean)) > CENTER_TOL:
                    raise SpecError(f"support is not centered (max |mean| {np.max(np.abs(mean)):.3g})", p)
            self.weights.append(w)
            self.mats.append(mats)
            c = np.cumsum(w)
            c[-1] = 1.0
            self.cum.append(c)
        self.n = len(supports)
        self.d = d
        self.alpha = 1.0 / self.n
        self.second_moments = np.stack(
            [np.tensordot(w, m @ m, axes=1) for w, m in zip(self.weights, self.mats)])
        self.means = np.stack([np.tensordot(w, m, axes=1) for w, m in zip(self.weights, self.mats)])

    def sample_states(self, rng, m):
        u = rng.random((m, self.n))
        out = np.empty((m, self.n), dtype=np.int64)
        for k in range(self.n):
            out[:, k] = np.searchsorted(self.cum[k], u[:, k], side="right")
        np.minimum(out, [len(w) - 1 for w in self.weights], out=out)
        return out

    def evaluate_batch(self, states):
        states = np.asarray(states)
        x = np.zeros((states.shape[0], self.d, self.d), dtype=np.complex128)
        for k in range(self.n):
            x += self.mats[k][states[:, k]]
        return x

    def summands(self, state):
        return np.stack([self.mats[k][state[k]] for k in range(self.n)])

    def state_space_size(self):
        return math.prod(len(w) for w in self.weights)

    def _all_states(self):
        return np.array(list(itertools.product(*[range(len(w)) for w in self.weights])),
                        dtype=np.int64).reshape(-1, self.n)

    def _state_weights(self, states):
        w = np.ones(len(states))
        for k in range(self.n):
            w *= self.weights[k][states[:, k]]
        return w

    def replacements(self, state):
        out = []
        for k in range(self.n):
            for prob, s in self.coordinate_replacements(state, k):
                out.append((prob / self.n, s))
        return out

    def coordinates(self):
        return self.n

    def coordinate_replacements(self, state, k):
        out = []
        for i, w in enumerate(self.weights[k]):
            s = np.array(state, copy=True)
            s[k] = i
            out.append((float(w), s))
        return out

    def conditional_variance(self, state):
        y = self.summands(state)
        return 0.5 * (np.sum(y @ y, axis=0) + np.sum(self.second_moments, axis=0))

    def conditional_variance_batch(self, states):
        states = np.asarray(states)
        out = np.broadcast_to(0.5 * np.sum(self.second_moments, axis=0),
                              (states.shape[0], self.d, self.d)).copy()
        for k in range(self.n):
            sq = self.mats[k] @ self.mats[k]
            out += 0.5 * sq[states[:, k]]
        return out

    def variance_proxy(self):
        """``sigma^2 = ||sum E Y_k^2||``."""
        return linalg.spectral_norm(linalg.hermitian(np.sum(self.second_moments, axis=0)))

    def uniform_bound(self):
        """``R = max ||Y_k||`` over all supports."""
        return max(linalg.spectral_norm(m) for mats in self.mats for m in mats)

    def dominating_squares(self):
        """Deterministic ``A_k^2 = max_i ||Y_k^(i)||^2 I``, so that ``Y_k^2 <= A_k^2``."""
        eye = np.eye(self.d)
        return np.stack([max(linalg.spectral_norm(m) for m in mats) ** 2 * eye for mats in self.mats])

    def to_json(self):
        return {"family": self.family, "supports": [
            [{"weight": float(w), "matrix": _mat_json(m)} for w, m in zip(ws, ms)]
            for ws, ms in zip(self.weights, self.mats)]}


class RademacherSeries(IndependentSum):
    """``X = sum_k eps_k A_k`` with independent random signs."""

    family = "rademacher_series"

    def __init__(self, coefficients, _pointer="/coefficients"):
        coeffs = _as_stack(coefficients, _pointer)
        self.coefficients = coeffs
        self.n, self.d = coeffs.shape[0], coeffs.shape[1]
        self.alpha = 1.0 / self.n
        sq = coeffs @ coeffs
        self.second_moments = sq
        self.means = np.zeros_like(coeffs)
        self.weights = [np.array([0.5, 0.5])] * self.n
        self.mats = [np.stack([-a, a]) for a in coeffs]
        self._flat = coeffs.reshape(self.n, -1)

    def sample_states(self, rng, m):
        return _signs(rng, m, self.n)

    def evaluate_batch(self, states):
        states = np.asarray(states, dtype=np.float64)
        return (states @ self._flat).reshape(-1, self.d, self.d)

    def summands(self, state):
        return np.asarray(state)[:, None, None] * self.coefficients

    def state_space_size(self):
        return 2 ** self.n

    def _all_states(self):
        return _all_signs(self.n)

    def _state_weights(self, states):
        return np.full(len(states), 1.0 / len(states))

    def coordinate_replacements(self, state, k):
        out = []
        for sgn in (-1, 1):
            s = np.array(state, copy=True)
            s[k] = sgn
            out.append((0.5, s))
        return out

    def conditional_variance(self, state):
        return np.sum(self.second_moments, axis=0)

    def conditional_variance_batch(self, states):
        total = np.sum(self.second_moments, axis=0)
        return np.broadcast_to(total, (len(states), self.d, self.d)).copy()

    def dominating_squares(self):
        return self.second_moments

    def to_json(self):
        return {"family": self.family, "coefficients": [_mat_json(a) for a in self.coefficients]}


class ModulatedSeries(Ensemble):
    """``X = sum_k eps_k W_k`` where ``(W_1, ..., W_n)`` is drawn jointly from a finite support.

    The summands are dependent through ``W`` but conditionally centered given
    the other summands. The pair resamples one sign, so ``alpha = 1/n`` and
    ``Delta = sum_k W_k^2``.
    """

    family = "modulated_series"

    def __init__(self, supports, _pointer="/supports"):
        if not supports:
            raise SpecError("needs at least one coefficient tuple", _pointer)
        w = []
        tuples = []
        for i, entry in enumerate(supports):
            p = _ptr(_pointer, i)
            w.append(float(entry[0]))
            tuples.append(_as_stack(entry[1], _ptr(p, "coefficients")))
            if tuples[-1].shape != tuples[0].shape:
                raise SpecError(f"shape {tuples[-1].shape} differs from {tuples[0].shape}",
                                _ptr(p, "coefficients"))
        w = np.array(w)
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise SpecError("weights must be positive", _pointer)
        if abs(math.fsum(w) - 1.0) > CENTER_TOL:
            raise SpecError(f"weights sum to {math.fsum(w)!r}, not 1", _pointer)
        self.tuple_weights = w
        self.cum = np.cumsum(w)
        self.cum[-1] = 1.0
        self.coefficients = np.stack(tuples)  # (M, n, d, d)
        _, self.n, self.d, _ = self.coefficients.shape
        self.alpha = 1.0 / self.n
        self._flat = self.coefficients.reshape(len(w), self.n, -1)

    def sample_states(self, rng, m):
        u = rng.random(m)
        idx = np.minimum(np.searchsorted(self.cum, u, side="right"), len(self.cum) - 1)
        return np.column_stack([idx, _signs(rng, m, self.n)])

    def evaluate_batch(self, states):
        states = np.asarray(states)
        flat = np.einsum("mk,mkx->mx", states[:, 1:].astype(np.float64), self._flat[states[:, 0]])
        return flat.reshape(-1, self.d, self.d).astype(np.complex128)

    def state_space_size(self):
        return len(self.tuple_weights) * 2 ** self.n

    def _all_states(self):
        signs = _all_signs(self.n)
        return np.array([[i, *s] for i in range(len(self.tuple_weights)) for s in signs],
                        dtype=np.int64)

    def _state_weights(self, states):
        return self.tuple_weights[states[:, 0]] / 2 ** self.n

    def coordinates(self):
        return self.n

    def coordinate_replacements(self, state, k):
        out = []
        for sgn in (-1, 1):
            s = np.array(state, copy=True)
            s[k + 1] = sgn
            out.append((0.5, s))
        return out

    def replacements(self, state):
        return [(p / self.n, s) for k in range(self.n) for p, s in self.coordinate_replacements(state, k)]

    def conditional_variance(self, state):
        w = self.coefficients[state[0]]
        return np.sum(w @ w, axis=0)

    def conditional_variance_batch(self, states):
        sq = np.sum(self.coefficients @ self.coefficients, axis=1)
        return sq[np.asarray(states)[:, 0]]

    def uniform_bound(self):
        return max(linalg.spectral_norm(m) for tup in self.coefficients for m in tup)

    def variance_proxy(self):
        sq = np.einsum("i,ikab->ab", self.tuple_weights,
                       np.einsum("ikab,ikbc->ikac", self.coefficients, self.coefficients))
        return linalg.spectral_norm(linalg.hermitian(sq))

    def to_json(self):
        return {"family": self.family, "supports": [
            {"weight": float(w), "coefficients": [_mat_json(a) for a in tup]}
            for w, tup in zip(self.tuple_weights, self.coefficients)]}


# permutation families

class CombinatorialSum(Ensemble):
    """``X = sum_j A[j, pi(j)]`` over a uniformly random permutation ``pi``.

    ``array`` has shape ``(n, n, d, d)`` and must sum to zero; the derived
    families below pass an already centered array.
    """

    family = "combinatorial_sum"
    limit = PERM_LIMIT

    def __init__(self, array, _pointer="/array"):
        arr = np.asarray(array, dtype=np.complex128)
        if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
            raise SpecError(f"expected an n x n array of square matrices, got shape {arr.shape}", _pointer)
        for j in range(arr.shape[0]):
            for k in range(arr.shape[1]):
                if linalg.hermiticity_residual(arr[j, k]) > linalg.HERMITIAN_TOL:
                    raise SpecError("matrix is not Hermitian", _ptr(_pointer, j, k))
        arr = (arr + np.conj(np.swapaxes(arr, 2, 3))) / 2
        total = arr.sum(axis=(0, 1))
        if np.max(np.abs(total)) > ZERO_SUM_TOL:
            raise SpecError(f"array total must vanish (max |entry| {np.max(np.abs(total)):.3g})", _pointer)
        self.array = arr
        self.n, self.d = arr.shape[0], arr.shape[2]
        self.alpha = 2.0 / self.n

    @staticmethod
    def _parse(rows, pointer):
        if not isinstance(rows, list) or not rows:
            raise SpecError("expected a nonempty square array of matrices", pointer)
        n = len(rows)
        out = []
        for j, row in enumerate(rows):
            p = _ptr(pointer, j)
            if not isinstance(row, list) or len(row) != n:
                raise SpecError(f"row has {len(row) if isinstance(row, list) else 'no'} entries, expected {n}", p)
            out.append(_as_stack(row, p))
        shapes = {o.shape for o in out}
        if len(shapes) != 1:
            raise SpecError("matrix dimensions differ between rows", pointer)
        return np.stack(out)

    def sample_states(self, rng, m):
        return _permutations(rng, m, self.n)

    def evaluate_batch(self, states):
        states = np.asarray(states)
        x = np.zeros((states.shape[0], self.d, self.d), dtype=np.complex128)
        for j in range(self.n):
            x += self.array[j, states[:, j]]
        return x

    def state_space_size(self):
        return math.factorial(self.n)

    def _all_states(self):
        return np.array(list(itertools.permutations(range(self.n))), dtype=np.int64).reshape(-1, self.n)

    def replacements(self, state):
        """``pi' = pi o (J K)`` with ``J, K`` independent and uniform."""
        out = []
        w = 1.0 / (self.n * self.n)
        for j in range(self.n):
            for k in range(self.n):
                s = np.array(state, copy=True)
                s[j], s[k] = state[k], state[j]
                out.append((w, s))
        return out

    def conditional_variance(self, state):
        a = self.array
        pi = np.asarray(state)
        diag = a[np.arange(self.n), pi]  # A[j, pi(j)]
        cross = a[:, pi]  # cross[j, k] = A[j, pi(k)]
        term = diag[:, None] + diag[None, :] - cross - np.swapaxes(cross, 0, 1)
        return np.einsum("jkab,jkbc->ac", term, term) / (4 * self.n)

    def bernstein_inputs(self):
        return self.array

    def to_json(self):
        return {"family": self.family, "array": [[_mat_json(m) for m in row] for row in self.array]}


def _center(arr):
    n = arr.shape[0]
    return arr - arr.sum(axis=(0, 1)) / (n * n)


class SamplingWithoutReplacement(CombinatorialSum):
    """Centered sum of ``s`` matrices drawn without replacement from ``B_1..B_N``."""

    family = "sampling_without_replacement"

    def __init__(self, matrices, sample_size, _pointer=""):
        b = _as_stack(matrices, _ptr(_pointer, "matrices"))
        N = b.shape[0]
        if not isinstance(sample_size, (int, np.integer)) or isinstance(sample_size, bool) \
                or not 1 <= sample_size <= N:
            raise SpecError(f"sample_size must be an integer in [1, {N}]", _ptr(_pointer, "sample_size"))
        self.population = b
        self.sample_size = int(sample_size)
        arr = np.zeros((N, N) + b.shape[1:], dtype=np.complex128)
        arr[: self.sample_size] = b[None, :]
        super().__init__(_center(arr))

    def to_json(self):
        return {"family": self.family, "matrices": [_mat_json(m) for m in self.population],
                "sample_size": self.sample_size}


class PermutedInnerProduct(CombinatorialSum):
    """Centered dilation of ``sum_j B_j C_pi(j)``; ``d = d1 + d2``."""

    family = "permuted_inner_product"

    def __init__(self, left, right, _pointer=""):
        B = _as_stack(left, _ptr(_pointer, "left"), hermitian=False)
        C = _as_stack(right, _ptr(_pointer, "right"), hermitian=False)
        if B.shape[0] != C.shape[0]:
            raise SpecError(f"left has {B.shape[0]} factors, right has {C.shape[0]}", _ptr(_pointer, "right"))
        if B.shape[2] != C.shape[1]:
            raise SpecError(f"inner dimensions {B.shape[2]} and {C.shape[1]} differ", _ptr(_pointer, "right"))
        self.left, self.right = B, C
        self.d1, self.d2 = B.shape[1], C.shape[2]
        n = B.shape[0]
        arr = np.stack([np.stack([linalg.hermitian_dilation(B[j] @ C[k]) for k in range(n)])
                        for j in range(n)])
        super().__init__(_center(arr))

    def to_json(self):
        return {"family": self.family, "left": [_mat_json(m) for m in self.left],
                "right": [_mat_json(m) for m in self.right]}


# self-reproducing chaos

class RademacherChaos(Ensemble):
    """``H = sum_{j<k} eps_j eps_k A_jk`` with ``A_jk = A_kj``; ``EH = 0``."""

    family = "rademacher_chaos"
    s = 2

    def __init__(self, array, _pointer="/array"):
        arr = np.asarray(array, dtype=np.complex128)
        if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
            raise SpecError(f"expected an n x n array of square matrices, got shape {arr.shape}", _pointer)
        n = arr.shape[0]
        for j in range(n):
            if np.max(np.abs(arr[j, j]), initial=0.0) > 0:
                raise SpecError("diagonal blocks must be zero (they do not enter the chaos)",
                                _ptr(_pointer, j, j))
            for k in range(j + 1, n):
                if np.max(np.abs(arr[j, k] - arr[k, j])) > linalg.HERMITIAN_TOL:
                    raise SpecError(f"A[{j}][{k}] differs from A[{k}][{j}]", _ptr(_pointer, k, j))
        self.array = arr
        self.n, self.d = n, arr.shape[2]
        self.alpha = self.s / self.n
        self._upper = np.triu(np.ones((n, n)), 1)[:, :, None, None] * arr

    def sample_states(self, rng, m):
        return _signs(rng, m, self.n)

    def evaluate_batch(self, states):
        e = np.asarray(states, dtype=np.float64)
        return np.einsum("mj,jkab,mk->mab", e, self._upper, e)

    def state_space_size(self):
        return 2 ** self.n

    def _all_states(self):
        return _all_signs(self.n)

    def coordinates(self):
        return self.n

    def coordinate_replacements(self, state, k):
        out = []
        for sgn in (-1, 1):
            s = np.array(state, copy=True)
            s[k] = sgn
            out.append((0.5, s))
        return out

    def replacements(self, state):
        return [(p / self.n, s) for k in range(self.n) for p, s in self.coordinate_replacements(state, k)]

    def _gradients(self, state):
        """``G_k = sum_{j != k} eps_j A_jk``, so that ``H - H^(k) = (eps_k - eps_k') G_k``."""
        e = np.asarray(state, dtype=np.float64)
        return np.einsum("j,jkab->kab", e, self.array)

    def conditional_variance(self, state):
        g = self._gradients(state)
        # E(eps - eps')^2 = 2 per coordinate
        return 2.0 / (2 * self.s) * np.sum(g @ g, axis=0)

    def conditional_variance_batch(self, states):
        e = np.asarray(states, dtype=np.float64)
        g = np.einsum("mj,jkab->mkab", e, self.array)
        return 2.0 / (2 * self.s) * np.einsum("mkab,mkbc->mac", g, g)

    def difference_bound(self):
        """``L = ||sum A_k^2||`` for the certificate ``A_k^2 = 2 (sum_j ||A_jk||)^2 I``."""
        norms = np.array([[linalg.spectral_norm(self.array[j, k]) if j != k else 0.0
                           for k in range(self.n)] for j in range(self.n)])
        return float(2 * np.sum(norms.sum(axis=0) ** 2))

    def to_json(self):
        return {"family": self.family, "array": [[_mat_json(m) for m in row] for row in self.array]}


# JSON

def parse_matrix(obj, pointer=""):
    """Row-major nested arrays whose entries are ``[re, im]`` pairs or plain numbers."""
    if not isinstance(obj, list) or not obj:
        raise SpecError("matrix must be a nonempty list of rows", pointer)
    rows = []
    width = None
    for i, row in enumerate(obj):
        p = _ptr(pointer, i)
        if not isinstance(row, list) or not row:
            raise SpecError("row must be a nonempty list", p)
        if width is not None and len(row) != width:
            raise SpecError(f"row has {len(row)} entries, expected {width}", p)
        width = len(row)
        vals = []
        for j, z in enumerate(row):
            q = _ptr(p, j)
            if _is_number(z):
                vals.append(complex(float(z), 0.0))
            elif isinstance(z, list) and len(z) == 2 and all(_is_number(u) for u in z):
                vals.append(complex(float(z[0]), float(z[1])))
            else:
                raise SpecError("entry must be a number or a [re, im] pair", q)
            if not (math.isfinite(vals[-1].real) and math.isfinite(vals[-1].imag)):
                raise SpecError("entry is not finite", q)
        rows.append(vals)
    return np.array(rows, dtype=np.complex128)


def _is_number(z):
    return isinstance(z, (int, float)) and not isinstance(z, bool)


def _matrix_list(obj, pointer):
    if not isinstance(obj, list) or not obj:
        raise SpecError("expected a nonempty list of matrices", pointer)
    return [parse_matrix(m, _ptr(pointer, i)) for i, m in enumerate(obj)]


def _require(obj, key, pointer):
    if key not in obj:
        raise SpecError(f"missing required field {key!r}", _ptr(pointer, key))
    return obj[key]


def _check_keys(obj, allowed, pointer):
    for key in obj:
        if key not in allowed:
            raise SpecError(f"unknown field {key!r}", _ptr(pointer, key))


def _weighted(entry, pointer, key):
    if not isinstance(entry, dict):
        raise SpecError("expected an object with 'weight' and '%s'" % key, pointer)
    _check_keys(entry, {"weight", key}, pointer)
    w = _require(entry, "weight", pointer)
    if not _is_number(w):
        raise SpecError("weight must be a number", _ptr(pointer, "weight"))
    return float(w)


def spec_from_json(obj) -> Ensemble:
    """Build an ensemble from parsed JSON, raising :class:`SpecError` with a JSON pointer."""
    if not isinstance(obj, dict):
        raise SpecError("spec must be a JSON object", "")
    family = _require(obj, "family", "")
    if family not in FAMILIES:
        raise SpecError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}", "/family")

    if family == "rademacher_series":
        _check_keys(obj, {"family", "coefficients"}, "")
        return RademacherSeries(_matrix_list(_require(obj, "coefficients", ""), "/coefficients"))

    if family == "independent_sum":
        _check_keys(obj, {"family", "supports"}, "")
        sups = _require(obj, "supports", "")
        if not isinstance(sups, list) or not sups:
            raise SpecError("expected a nonempty list of supports", "/supports")
        parsed = []
        for k, sup in enumerate(sups):
            p = _ptr("/supports", k)
            if not isinstance(sup, list) or not sup:
                raise SpecError("support must be a nonempty list", p)
            parsed.append([(_weighted(e, _ptr(p, i), "matrix"),
                            parse_matrix(_require(e, "matrix", _ptr(p, i)), _ptr(p, i, "matrix")))
                           for i, e in enumerate(sup)])
        return IndependentSum(parsed)

    if family == "modulated_series":
        _check_keys(obj, {"family", "supports"}, "")
        sups = _require(obj, "supports", "")
        if not isinstance(sups, list) or not sups:
            raise SpecError("expected a nonempty list of coefficient tuples", "/supports")
        parsed = []
        for i, e in enumerate(sups):
            p = _ptr("/supports", i)
            w = _weighted(e, p, "coefficients")
            parsed.append((w, _matrix_list(_require(e, "coefficients", p), _ptr(p, "coefficients"))))
        return ModulatedSeries(parsed)

    if family in ("combinatorial_sum", "rademacher_chaos"):
        _check_keys(obj, {"family", "array"}, "")
        rows = _require(obj, "array", "")
        if not isinstance(rows, list) or not rows:
            raise SpecError("expected a nonempty square array of matrices", "/array")
        n = len(rows)
        for j, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != n:
                raise SpecError(f"row must list {n} matrices", _ptr("/array", j))
        mats = [[parse_matrix(m, _ptr("/array", j, k)) for k, m in enumerate(row)]
                for j, row in enumerate(rows)]
        arr = CombinatorialSum._parse(mats, "/array")
        return CombinatorialSum(arr) if family == "combinatorial_sum" else RademacherChaos(arr)

    if family == "sampling_without_replacement":
        _check_keys(obj, {"family", "matrices", "sample_size"}, "")
        mats = _matrix_list(_require(obj, "matrices", ""), "/matrices")
        return SamplingWithoutReplacement(mats, _require(obj, "sample_size", ""))

    _check_keys(obj, {"family", "left", "right"}, "")
    left = _matrix_list(_require(obj, "left", ""), "/left")
    right = _matrix_list(_require(obj, "right", ""), "/right")
    return PermutedInnerProduct(left, right)
