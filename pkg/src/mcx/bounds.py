"""Closed-form tail and moment bounds for random Hermitian matrices.

Every constructor returns a :class:`BoundSet` whose raw formulas are kept
exactly as derived; clamping to ``[0, 1]`` happens only when a tail value is
queried through the ``BoundSet``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar

from . import linalg

PSD_TOL = 1e-10
ZERO_SUM_TOL = 1e-10


def _check_t(t):
    t = float(t)
    if not t >= 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    return t


def _clamp(p):
    return min(1.0, max(0.0, p))


def _degenerate(t):
    return 1.0 if t == 0 else 0.0


@dataclass(frozen=True)
class BoundSet:
    """Tail and mean bounds for ``lambda_max`` (and optionally ``lambda_min``).

    ``upper`` and ``lower`` are the raw formulas, ``t -> bound`` before clamping.
    """

    d: int
    provenance: str
    upper: Callable[[float], float]
    mean_upper: float
    lower: Optional[Callable[[float], float]] = None
    mean_lower: Optional[float] = None
    params: Mapping[str, float] = field(default_factory=dict)

    def tail_upper(self, t) -> float:
        """Bound on ``P(lambda_max >= t)``."""
        return _clamp(self.upper(_check_t(t)))

    tail = tail_upper

    def tail_lower(self, t) -> Optional[float]:
        """Bound on ``P(lambda_min <= -t)``; ``None`` when no lower bound exists."""
        if self.lower is None:
            return None
        return _clamp(self.lower(_check_t(t)))

    def to_dict(self, t_grid: Sequence[float]) -> dict:
        return {
            "provenance": self.provenance,
            "d": self.d,
            "mean_upper": self.mean_upper,
            "mean_lower": self.mean_lower,
            "tail": [[float(t), self.tail_upper(t)] for t in t_grid],
        }


@dataclass(frozen=True)
class VarianceSummary:
    sigma2: float = 0.0
    R: float = 0.0
    c: float = 0.0
    v: float = 0.0
    r_of_psi: float = 0.0
    psi: float = 1.0

    def __post_init__(self):
        for name in ("sigma2", "R", "c", "v", "r_of_psi"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.psi > 0:
            raise ValueError("psi must be positive")


def _check_d(d):
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    return int(d)


def _degenerate_set(d, provenance, params, lower=True):
    return BoundSet(d, provenance, _degenerate, 0.0,
                    _degenerate if lower else None, 0.0 if lower else None, params)


# bounded differences: Delta_X <= c X + v I

def _bounded(c, v, d, provenance, params):
    d = _check_d(d)
    if not c >= 0:
        raise ValueError(f"c must be >= 0, got {c}")
    if v == 0:
        return _degenerate_set(d, provenance, params)
    logd = math.log(d)

    def lower(t):
        return d * math.exp(-t * t / (2 * v))

    if c == 0:
        upper = lower
    else:
        def upper(t):
            poisson = -t / c + (v / (c * c)) * math.log1p(c * t / v)
            subgamma = -t * t / (2 * v + 2 * c * t)
            return d * math.exp(min(poisson, subgamma))

    return BoundSet(d, provenance, upper, math.sqrt(2 * v * logd) + c * logd,
                    lower, -math.sqrt(2 * v * logd), params)


def bounded_concentration(c: float, v: float, d: int) -> BoundSet:
    """Bounds for a Stein pair whose conditional variance obeys ``Delta <= cX + vI``."""
    if not v > 0:
        raise ValueError(f"v must be > 0, got {v}")
    return _bounded(float(c), float(v), d, "bounded concentration", {"c": c, "v": v})


def refined_concentration(r: float, psi: float, d: int) -> BoundSet:
    """Bounds driven by ``r(psi) = psi^-1 log E tr-bar exp(psi Delta)``."""
    d = _check_d(d)
    if not psi > 0:
        raise ValueError(f"psi must be > 0, got {psi}")
    if not r >= 0:
        raise ValueError(f"r must be >= 0, got {r}")
    params = {"r": r, "psi": psi}
    if r == 0:
        return _degenerate_set(d, "refined concentration", params, lower=False)
    rs = math.sqrt(psi)
    logd = math.log(d)

    def upper(t):
        return d * math.exp(-t * t / (2 * r + 2 * t / rs))

    return BoundSet(d, "refined concentration", upper,
                    math.sqrt(2 * r * logd) + logd / rs, params=params)


def theta_star(t: float, psi: float, r: float) -> float:
    """Minimizer of ``-theta t + r theta^2 / (2 (1 - theta^2/psi))``.

    Evaluated in the cancellation-free form ``(2t/r) / (sqrt(1 + b^2) + 1)``
    with ``b = 2t / (r sqrt(psi))``.
    """
    if not (t > 0 and psi > 0 and r > 0):
        raise ValueError("theta_star needs t, psi, r > 0")
    b = 2 * t / (r * math.sqrt(psi))
    return (2 * t / r) / (math.hypot(1.0, b) + 1.0)


def hoeffding(bounds_sq, second_moments):
    """Matrix Hoeffding: returns ``(sigma2, BoundSet)``.

    Parameters
    ----------
    bounds_sq : sequence of Hermitian matrices
        The dominating squares ``A_k^2``.
    second_moments : sequence of Hermitian matrices
        The second moments ``E Y_k^2``.
    """
    mats = [linalg.hermitian(m) for m in list(bounds_sq) + list(second_moments)]
    if not mats:
        raise ValueError("need at least one summand")
    d = mats[0].shape[0]
    for m in mats:
        if m.shape[0] != d:
            raise ValueError(f"dimension mismatch: {m.shape[0]} vs {d}")
        if not linalg.is_psd(m, PSD_TOL):
            raise ValueError("input matrices must be psd")
    sigma2 = 0.5 * linalg.spectral_norm(sum(mats))
    return sigma2, _bounded(0.0, sigma2, d, "matrix Hoeffding", {"sigma2": sigma2})


def _check_bernstein(sigma2, R):
    if not sigma2 >= 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 > 0 and not R > 0:
        raise ValueError(f"R must be > 0, got {R}")
    if R < 0:
        raise ValueError(f"R must be >= 0, got {R}")


def bernstein(sigma2: float, R: float, d: int, provenance: str = "matrix Bernstein") -> BoundSet:
    d = _check_d(d)
    _check_bernstein(sigma2, R)
    params = {"sigma2": sigma2, "R": R}
    if sigma2 == 0:
        return _degenerate_set(d, provenance, params, lower=False)
    logd = math.log(d)

    def upper(t):
        return d * math.exp(-t * t / (3 * sigma2 + 2 * R * t))

    return BoundSet(d, provenance, upper,
                    math.sqrt(sigma2) * math.sqrt(3 * logd) + R * logd, params=params)


def rectangular_bernstein(row_var, col_var, R, d1, d2) -> BoundSet:
    """Bernstein for ``||sum Z_k||`` with ``d1 x d2`` summands, via the dilation."""
    sigma2 = max(float(row_var), float(col_var))
    if row_var < 0 or col_var < 0:
        raise ValueError("variances must be >= 0")
    return bernstein(sigma2, R, _check_d(d1) + _check_d(d2), "rectangular matrix Bernstein")


def combinatorial_bernstein(A, d: Optional[int] = None):
    """Bernstein bound for ``sum_j A[j, pi(j)]`` over a uniform permutation.

    ``A`` is an ``(n, n, d, d)`` array (or nested lists) whose total is zero.
    Returns ``(sigma2, R, BoundSet)``.
    """
    arr = np.asarray(A, dtype=np.complex128)
    if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
        raise ValueError(f"expected an n x n array of square matrices, got shape {arr.shape}")
    n, dim = arr.shape[0], arr.shape[2]
    d = dim if d is None else _check_d(d)
    total = arr.sum(axis=(0, 1))
    if np.max(np.abs(total)) > ZERO_SUM_TOL:
        raise ValueError(f"array total must vanish, max entry {np.max(np.abs(total)):.3g}")
    blocks = [linalg.hermitian(arr[j, k]) for j in range(n) for k in range(n)]
    sigma2 = linalg.spectral_norm(sum(b @ b for b in blocks)) / n
    R = max(linalg.spectral_norm(b) for b in blocks)
    params = {"sigma2": sigma2, "R": R}
    if sigma2 == 0:
        return sigma2, R, _degenerate_set(d, "combinatorial matrix Bernstein", params, lower=False)
    logd = math.log(d)
    s2 = math.sqrt(2)

    def upper(t):
        return d * math.exp(-t * t / (12 * sigma2 + 4 * s2 * R * t))

    mean = math.sqrt(sigma2) * math.sqrt(12 * logd) + 2 * s2 * R * logd
    return sigma2, R, BoundSet(d, "combinatorial matrix Bernstein", upper, mean, params=params)


def bounded_differences(s: float, L: float, d: int) -> BoundSet:
    """Tail ``d exp(-s t^2 / L)`` for a self-reproducing function with parameter ``s``."""
    d = _check_d(d)
    if not s > 0:
        raise ValueError(f"s must be > 0, got {s}")
    if not L >= 0:
        raise ValueError(f"L must be >= 0, got {L}")
    params = {"s": s, "L": L}
    if L == 0:
        return _degenerate_set(d, "matrix bounded differences", params, lower=False)

    def upper(t):
        return d * math.exp(-s * t * t / L)

    return BoundSet(d, "matrix bounded differences", upper,
                    math.sqrt(L * math.log(d) / s), params=params)


def chebyshev_tail(moments: Mapping[float, float], t: float) -> float:
    """``min(1, min_p t^-p E||X||_p^p)``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    if not moments:
        raise ValueError("need at least one moment")
    best = math.inf
    for p, m in moments.items():
        if p < 1 or m < 0:
            raise ValueError(f"invalid moment entry p={p}, value={m}")
        # log space keeps t^-p finite for large p
        val = 0.0 if m == 0 else math.exp(math.log(m) - p * math.log(t))
        best = min(best, val)
    return min(1.0, best)


# moment inequalities

def _bdg_constant(p, allow_low_p):
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if 1 < p < 1.5:
        if not allow_low_p:
            raise ValueError(f"p in (1, 1.5) needs allow_low_p=True, got {p}")
        return math.sqrt(4 * p - 2)
    return math.sqrt(2 * p - 1)


def bdg_bound(p: float, delta_moment: float, allow_low_p: bool = False) -> float:
    """Upper bound on ``(E||X||_{2p}^{2p})^{1/2p}`` from ``E||Delta||_p^p``."""
    const = _bdg_constant(p, allow_low_p)
    if delta_moment < 0:
        raise ValueError("delta_moment must be >= 0")
    return const * delta_moment ** (1 / (2 * p))


def _psd_sqrt_norm(mat, p):
    m = linalg.hermitian(mat)
    if not linalg.is_psd(m, PSD_TOL):
        raise ValueError("input must be psd")
    return linalg.schatten_norm(linalg.msqrt(m), 2 * p)


def khintchine(p: float, coeff_squares_sum, second_moment_sum=None,
               allow_low_p: bool = False) -> float:
    """Khintchine bound on ``(E||X||_{2p}^{2p})^{1/2p}``.

    With ``second_moment_sum`` absent this is the Rademacher-series form,
    otherwise the general independent-sum form.
    """
    const = _bdg_constant(p, allow_low_p)
    if second_moment_sum is None:
        return const * _psd_sqrt_norm(coeff_squares_sum, p)
    a = linalg.hermitian(coeff_squares_sum)
    b = linalg.hermitian(second_moment_sum)
    if not (linalg.is_psd(a, PSD_TOL) and linalg.is_psd(b, PSD_TOL)):
        raise ValueError("inputs must be psd")
    return const / math.sqrt(2) * _psd_sqrt_norm(a + b, p)


def rosenthal_psd(p: float, mean_norm: float, summand_moments: float,
                  allow_low_p: bool = False) -> float:
    """Bound on ``(E||sum P_k||_{2p}^{2p})^{1/2p}`` for independent psd ``P_k``."""
    const = math.sqrt(2) * _bdg_constant(p, allow_low_p)
    if mean_norm < 0 or summand_moments < 0:
        raise ValueError("inputs must be >= 0")
    return (math.sqrt(mean_norm) + const * summand_moments ** (1 / (4 * p))) ** 2


def rosenthal_hermitian(p: float, variance_norm: float, summand_moments: float,
                        allow_low_p: bool = False) -> float:
    """Bound on ``(E||sum Y_k||_{4p}^{4p})^{1/4p}`` for centered independent ``Y_k``."""
    c = math.sqrt(4 * p - 1)
    psd_const = math.sqrt(2) * _bdg_constant(p, allow_low_p)
    if variance_norm < 0 or summand_moments < 0:
        raise ValueError("inputs must be >= 0")
    # c * psd_const <= 4p - 1 in the default range, which gives the simplified form
    second = 4 * p - 1 if not 1 < p < 1.5 else c * psd_const
    return c * variance_norm + second * summand_moments ** (1 / (4 * p))


def buchholz_comparison(p_max: int = 20, dps: int = 50):
    """Check ``(2p-1)^p < e^{p-1/2} (2p-1)!!`` for ``p = 1..p_max``.

    Returns a list of ``(p, lhs, rhs, margin)`` with ``margin = rhs - lhs``
    as mpmath floats at ``dps`` digits.
    """
    rows = []
    with mpmath.workdps(dps):
        for p in range(1, p_max + 1):
            lhs = mpmath.mpf((2 * p - 1) ** p)
            dfact = math.prod(range(1, 2 * p, 2))
            rhs = mpmath.e ** (p - mpmath.mpf(1) / 2) * dfact
            rows.append((p, lhs, rhs, rhs - lhs))
    return rows


# trace mgf estimates

_SERIES_CUTOFF = 1e-3


def mgf_bound_bounded(c: float, v: float, theta: float, tight: bool = True) -> float:
    """Upper bound on ``log m(theta)`` when ``Delta <= cX + vI``."""
    if c < 0 or v < 0:
        raise ValueError("c and v must be >= 0")
    if theta <= 0 or c == 0:
        return v * theta * theta / 2
    x = c * theta
    if x >= 1:
        raise ValueError(f"theta must be < 1/c = {1 / c}, got {theta}")
    if not tight:
        return v * theta * theta / (2 * (1 - x))
    if x < _SERIES_CUTOFF:
        # log(1/(1-x)) - x = sum_{k>=2} x^k / k
        s = math.fsum(x ** k / k for k in range(2, 14))
    else:
        s = -math.log1p(-x) - x
    return v / (c * c) * s


def mgf_bound_refined(r: float, psi: float, theta: float) -> float:
    """``r theta^2 / (2 (1 - theta^2/psi))`` on ``0 <= theta < sqrt(psi)``."""
    if not psi > 0:
        raise ValueError("psi must be > 0")
    if r < 0:
        raise ValueError("r must be >= 0")
    if theta < 0:
        raise ValueError("theta must be >= 0")
    if theta >= math.sqrt(psi):
        raise ValueError(f"theta must be < sqrt(psi) = {math.sqrt(psi)}, got {theta}")
    val = r * theta * theta / (2 * (1 - theta * theta / psi))
    return math.inf if val > 1e308 else val


PSI_PRESETS = {
    "inv_R2": lambda R: 1.0 / (R * R),
    "inv_8R2": lambda R: 1.0 / (8 * R * R),
}


def psi_preset(name: str, R: float) -> float:
    if name not in PSI_PRESETS:
        raise ValueError(f"unknown psi preset {name!r}; have {sorted(PSI_PRESETS)}")
    if not R > 0:
        raise ValueError("psi presets need R > 0")
    return PSI_PRESETS[name](R)


# numerical Laplace transform method

SIDES = ("upper_tail", "lower_tail", "upper_mean", "lower_mean")
GRID_POINTS = 200
UNBOUNDED_THETA = 1e6


def laplace_bounds(log_m_bound: Callable[[float], float], d: int, t: float, side: str,
                   theta_max: float = math.inf, closed_form_theta: Optional[float] = None) -> float:
    """Optimize a Laplace-transform bound over ``theta`` numerically.

    Parameters
    ----------
    log_m_bound : callable
        ``theta -> bound on log m(theta)``, valid for ``0 < |theta| < theta_max``
        on the side's sign.
    side : one of ``SIDES``
        Upper sides search ``theta > 0``, lower sides ``theta < 0``.
    closed_form_theta : float, optional
        A known optimizer; the result is never looser than its value.

    Returns
    -------
    float
        Tail sides are clamped to ``[0, 1]``; mean sides are unclamped.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    d = _check_d(d)
    t = _check_t(t) if side.endswith("tail") else float(t)
    if not theta_max > 0:
        raise ValueError("empty theta domain")
    sign = 1.0 if side.startswith("upper") else -1.0
    logd = math.log(d)

    def objective(mag):
        theta = sign * mag
        lm = log_m_bound(theta)
        if not math.isfinite(lm):
            raise ValueError(f"non-finite curve value {lm} at theta={theta}")
        if side.endswith("tail"):
            return logd - mag * t + lm
        # upper mean is an infimum; lower mean is a supremum of a negative quotient
        return (logd + lm) / mag

    hi = theta_max * (1 - 1e-9) if math.isfinite(theta_max) else UNBOUNDED_THETA
    if closed_form_theta is not None and not math.isfinite(theta_max):
        hi = max(hi, 10 * abs(closed_form_theta))
    grid = np.geomspace(1e-12 * hi, hi, GRID_POINTS)
    vals = np.array([objective(g) for g in grid])
    i = int(np.argmin(vals))
    lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    fine = np.linspace(lo_b, hi_b, GRID_POINTS)
    fine_vals = np.array([objective(g) for g in fine])
    best = min(float(vals[i]), float(np.min(fine_vals)))
    res = minimize_scalar(objective, bounds=(lo_b, hi_b), method="bounded",
                          options={"xatol": 1e-14 * hi_b})
    if res.success and math.isfinite(res.fun):
        best = min(best, float(res.fun))
    if closed_form_theta is not None:
        mag = abs(closed_form_theta)
        if 0 < mag < theta_max:
            best = min(best, objective(mag))

    if side.endswith("tail"):
        return _clamp(math.exp(min(best, 0.0)))
    if side == "upper_mean":
        return best
    return -best
