"""Exchangeable-pair (matrix Stein pair) models built on the ensembles.

Every family exposes the full conditional law of the replacement state, so
conditional means and variances are exact finite averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from . import ensembles, linalg
from .ensembles import Ensemble


class PairSample(NamedTuple):
    state: np.ndarray
    x: np.ndarray
    x_prime: np.ndarray


class SelfReproError(ValueError):
    def __init__(self, state, residual):
        self.state = state
        self.residual = residual
        super().__init__(f"self-reproducing identity fails at state {ensembles._fmt(state)} "
                         f"(residual {residual:.3g})")


@dataclass(frozen=True)
class SteinPairModel:
    ensemble: Ensemble
    alpha: float
    d: int
    n: int
    state_kind: str

    @property
    def family(self):
        return self.ensemble.family


_STATE_KIND = {
    "independent_sum": "support indices",
    "rademacher_series": "sign vector",
    "modulated_series": "coefficient index and sign vector",
    "combinatorial_sum": "permutation",
    "sampling_without_replacement": "permutation",
    "permuted_inner_product": "permutation",
    "rademacher_chaos": "sign vector",
}


def build_stein_pair(spec) -> SteinPairModel:
    """Wrap an ensemble (or its parsed JSON) with the family's Stein pair."""
    ens = spec if isinstance(spec, Ensemble) else ensembles.spec_from_json(spec)
    if ens.family not in _STATE_KIND:
        raise ValueError(f"unsupported family {ens.family!r}")
    alpha = float(ens.alpha)
    if not 0 < alpha <= 1:
        raise ValueError(f"scale factor {alpha} outside (0, 1]")
    return SteinPairModel(ens, alpha, ens.d, ens.n, _STATE_KIND[ens.family])


def _model(m):
    return m if isinstance(m, SteinPairModel) else build_stein_pair(m)


def sample_pair(model: SteinPairModel, rng: np.random.Generator) -> PairSample:
    """Draw ``Z`` and then ``Z'`` from its exact conditional law."""
    ens = model.ensemble
    state = ens.sample_states(rng, 1)[0]
    law = ens.replacements(state)
    cum = np.cumsum([p for p, _ in law])
    i = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(law) - 1)
    z2 = law[i][1]
    return PairSample(state, ens.evaluate(state), ens.evaluate(z2))


def _replacement_stack(ens, state):
    law = ens.replacements(state)
    probs = np.array([p for p, _ in law])
    xs = ens.evaluate_batch(np.stack([s for _, s in law]))
    return probs, xs


def conditional_variance(model: SteinPairModel, state) -> np.ndarray:
    """Closed-form ``Delta_X(Z)`` for the model's family."""
    return linalg.hermitian(model.ensemble.conditional_variance(np.asarray(state)), tol=1e-9)


def conditional_variance_generic(model: SteinPairModel, state) -> np.ndarray:
    """``(1/2 alpha) E[(X - X')^2 | Z]`` by direct averaging over the replacement law."""
    ens = model.ensemble
    x = ens.evaluate(state)
    probs, xs = _replacement_stack(ens, state)
    diff = x[None] - xs
    return linalg.hermitian(np.einsum("i,iab,ibc->ac", probs, diff, diff) / (2 * model.alpha), tol=1e-9)


def conditional_mean_shift(model: SteinPairModel, state) -> np.ndarray:
    """``E[X - X' | Z]``."""
    ens = model.ensemble
    x = ens.evaluate(state)
    probs, xs = _replacement_stack(ens, state)
    return x - np.tensordot(probs, xs, axes=1)


def stein_residual(model: SteinPairModel, state) -> float:
    """Spectral norm of ``E[X - X' | Z] - alpha X``."""
    x = model.ensemble.evaluate(state)
    r = conditional_mean_shift(model, state) - model.alpha * x
    r = (r + r.conj().T) / 2
    return linalg.spectral_norm(r)


def _joint_law(model):
    """Enumerated law of ``(X, X')`` as arrays ``(weights, xs, xps)``."""
    ens = model.ensemble
    table = ens.enumerate()
    ws, xs, xps = [], [], []
    for w, state, x in zip(table.weights, table.states, table.xs):
        probs, rep = _replacement_stack(ens, state)
        ws.append(w * probs)
        xs.append(np.broadcast_to(x, rep.shape))
        xps.append(rep)
    return np.concatenate(ws), np.concatenate(xs), np.concatenate(xps)


def _key(a, decimals):
    r = np.round(np.asarray(a), decimals) + 0.0  # folds -0.0 into 0.0
    return np.ascontiguousarray(r).tobytes()


def exchangeability_gap(model: SteinPairModel, decimals: int = 9) -> float:
    """Largest weight difference between the laws of ``(X, X')`` and ``(X', X)``.

    Outcomes are matched as a multiset keyed by entries rounded to ``decimals``.
    """
    ws, xs, xps = _joint_law(model)
    law = {}
    for w, a, b in zip(ws, xs, xps):
        ka, kb = _key(a, decimals), _key(b, decimals)
        law[(ka, kb)] = law.get((ka, kb), 0.0) + w
    gap = 0.0
    for (ka, kb), w in law.items():
        gap = max(gap, abs(w - law.get((kb, ka), 0.0)))
    return gap


def pairs_identity_gap(model: SteinPairModel, F: Callable[[np.ndarray], np.ndarray]) -> float:
    """Max entrywise gap in ``E[X F(X)] = (1/2 alpha) E[(X - X')(F(X) - F(X'))]``."""
    ws, xs, xps = _joint_law(model)
    fx = np.stack([F(x) for x in xs])
    fxp = np.stack([F(x) for x in xps])
    lhs = np.einsum("i,iab,ibc->ac", ws, xs, fx)
    rhs = np.einsum("i,iab,ibc->ac", ws, xs - xps, fx - fxp) / (2 * model.alpha)
    return float(np.max(np.abs(lhs - rhs)))


def mean_delta_gap(model: SteinPairModel) -> float:
    """Max entrywise gap in ``E Delta_X = E X^2`` by full enumeration."""
    ens = model.ensemble
    table = ens.enumerate()
    ed = sum(w * ens.conditional_variance(s) for w, s in zip(table.weights, table.states))
    ex2 = np.einsum("i,iab,ibc->ac", table.weights, table.xs, table.xs)
    return float(np.max(np.abs(ed - ex2)))


def bounded_consequence_gap(model: SteinPairModel, c: float, v: float) -> float:
    """Smallest eigenvalue of ``cX + vI - (alpha/2) X^2`` over enumerated outcomes."""
    table = model.ensemble.enumerate()
    eye = np.eye(model.d)
    worst = math.inf
    for x in table.xs:
        worst = min(worst, linalg.lambda_min(c * x + v * eye - model.alpha / 2 * (x @ x)))
    return worst


def delta_stack(model: SteinPairModel, states) -> np.ndarray:
    out = model.ensemble.conditional_variance_batch(states)
    return (out + np.conj(np.swapaxes(out, 1, 2))) / 2


def r_psi(model: SteinPairModel, psi: float, mode: str = "exact",
          samples: int = 10_000, seed: int = 0) -> float:
    """``r(psi) = (1/psi) log E tr-bar exp(psi Delta_X)``.

    ``mode`` is ``"exact"`` (full enumeration) or ``"monte_carlo"``.
    """
    if not psi > 0:
        raise ValueError(f"psi must be > 0, got {psi}")
    ens = model.ensemble
    if mode == "exact":
        table = ens.enumerate()
        states, weights = table.states, table.weights
    elif mode == "monte_carlo":
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        states = ens.sample_states(rng, samples)
        weights = np.full(samples, 1.0 / samples)
    else:
        raise ValueError(f"mode must be 'exact' or 'monte_carlo', got {mode!r}")
    lam = linalg.eigvalsh_batch(delta_stack(model, states))
    # log E tr-bar e^{psi Delta} = logsumexp over (state, eigenvalue) with weight w/d
    b = np.repeat(weights[:, None] / model.d, model.d, axis=1)
    return float(logsumexp(psi * lam, b=b)) / psi


def self_repro_check(spec, tol: float = 1e-9) -> Optional[float]:
    """Recover ``s`` in ``sum_k (H - E[H^(k) | z]) = s (H - EH)`` over every state.

    Returns ``None`` when ``H - EH`` vanishes identically.
    """
    ens = spec.ensemble if isinstance(spec, SteinPairModel) else (
        spec if isinstance(spec, Ensemble) else ensembles.spec_from_json(spec))
    if ens.coordinates() == 0:
        raise ValueError(f"family {ens.family!r} has no resampleable coordinates")
    table = ens.enumerate()
    centered = table.xs - table.mean_matrix()[None]
    drift = np.empty_like(centered)
    for i, state in enumerate(table.states):
        total = np.zeros((ens.d, ens.d), dtype=np.complex128)
        for k in range(ens.coordinates()):
            law = ens.coordinate_replacements(state, k)
            xs = ens.evaluate_batch(np.stack([s for _, s in law]))
            total += table.xs[i] - np.tensordot([p for p, _ in law], xs, axes=1)
        drift[i] = total
    denom = float(np.sum(np.abs(centered) ** 2))
    scale = max(1.0, float(np.max(np.abs(table.xs))))
    if denom <= (tol * scale) ** 2:
        return None
    s = float(np.real(np.sum(np.conj(centered) * drift))) / denom
    for i, state in enumerate(table.states):
        res = float(np.max(np.abs(drift[i] - s * centered[i])))
        if res > tol * scale * max(1.0, abs(s)):
            raise SelfReproError(state, res)
    return s
