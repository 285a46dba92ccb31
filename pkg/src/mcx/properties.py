"""Randomized property suite for the trace inequalities and Stein pair identities.

Each property draws ``cases`` random instances from its own Philox stream
(``SeedSequence(seed, spawn_key=(index,))``) and stops at the first
counterexample, which is returned with its full inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bounds, ensembles, linalg, stein

DIMS = (1, 2, 3, 5, 8)
REL_SLACK = 1e-9
FAULTS = ("symmetrize", "noncentered")


@dataclass
class PropertyResult:
    name: str
    cases: int
    passed: bool
    witness: Optional[dict] = field(default=None)


@dataclass
class SuiteReport:
    seed: int
    cases: int
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list:
        out = []
        for r in self.results:
            out.append(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.cases} cases)")
            if r.witness is not None:
                for k, v in r.witness.items():
                    out.append(f"  {k} = {_show(v)}")
        out.append(f"{'PASS' if self.passed else 'FAIL'} all ({len(self.results)} properties, seed {self.seed})")
        return out


def _show(v):
    if isinstance(v, np.ndarray):
        return np.array2string(v, precision=17, separator=", ", max_line_width=10 ** 6)
    return repr(v)


def _leq(lhs, rhs, slack=REL_SLACK):
    return lhs <= rhs + slack * max(1.0, abs(lhs), abs(rhs))


# random inputs

def rand_hermitian(rng, d, scale=1.0):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    a = (g + g.conj().T) / 2
    nrm = linalg.spectral_norm(linalg.hermitian(a))
    return linalg.hermitian(a * (scale / nrm if nrm > 0 else 1.0))


def rand_psd(rng, d, scale=1.0):
    rank = int(rng.integers(1, d + 1))
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return linalg.hermitian(m * scale / max(linalg.spectral_norm(linalg.hermitian(m)), 1e-300))


def rand_general(rng, d1, d2):
    return rng.standard_normal((d1, d2)) + 1j * rng.standard_normal((d1, d2))


def _centered_support(rng, d, size):
    w = rng.random(size) + 0.1
    w = w / math.fsum(w)
    mats = np.stack([rand_hermitian(rng, d, rng.uniform(0.2, 1.5)) for _ in range(size)])
    mats = mats - np.tensordot(w, mats, axes=1)[None]
    return [(float(wi), m) for wi, m in zip(w, mats)]


def _centered_array(rng, n, d):
    arr = np.stack([np.stack([rand_hermitian(rng, d, rng.uniform(0.2, 1.0)) for _ in range(n)])
                    for _ in range(n)])
    return arr - arr.sum(axis=(0, 1)) / (n * n)


def random_ensemble(rng, d, family=None, fault=None):
    """A small enumerable ensemble of dimension ``d`` (``d1 + d2`` for the inner product)."""
    family = family or ensembles.FAMILIES[int(rng.integers(len(ensembles.FAMILIES)))]
    if family == "independent_sum":
        n = int(rng.integers(1, 4))
        sups = [_centered_support(rng, d, int(rng.integers(2, 4))) for _ in range(n)]
        if fault == "noncentered":
            w, m = sups[0][0]
            sups[0][0] = (w, m + np.eye(d))
            return ensembles.IndependentSum(sups, check=False)
        return ensembles.IndependentSum(sups)
    if family == "rademacher_series":
        n = int(rng.integers(1, 5))
        return ensembles.RademacherSeries([rand_hermitian(rng, d, rng.uniform(0.2, 1.5)) for _ in range(n)])
    if family == "modulated_series":
        n = int(rng.integers(1, 4))
        M = int(rng.integers(1, 3))
        w = rng.random(M) + 0.1
        w = w / math.fsum(w)
        return ensembles.ModulatedSeries(
            [(float(wi), [rand_hermitian(rng, d, rng.uniform(0.2, 1.5)) for _ in range(n)]) for wi in w])
    if family == "combinatorial_sum":
        return ensembles.CombinatorialSum(_centered_array(rng, int(rng.integers(2, 5)), d))
    if family == "sampling_without_replacement":
        N = int(rng.integers(2, 5))
        return ensembles.SamplingWithoutReplacement(
            [rand_hermitian(rng, d, rng.uniform(0.2, 1.5)) for _ in range(N)], int(rng.integers(1, N + 1)))
    if family == "permuted_inner_product":
        n = int(rng.integers(2, 5))
        d1 = max(1, d // 2)
        d2 = max(1, d - d1)
        s = int(rng.integers(1, 3))
        return ensembles.PermutedInnerProduct([rand_general(rng, d1, s) * 0.5 for _ in range(n)],
                                              [rand_general(rng, s, d2) * 0.5 for _ in range(n)])
    n = int(rng.integers(2, 5))
    arr = np.zeros((n, n, d, d), dtype=np.complex128)
    for j in range(n):
        for k in range(j + 1, n):
            arr[j, k] = arr[k, j] = rand_hermitian(rng, d, rng.uniform(0.2, 1.0))
    return ensembles.RademacherChaos(arr)


# matrix function with optional fault

def _matrix_function(fault):
    if fault != "symmetrize":
        return linalg.matrix_function

    def broken(a, f, domain=linalg.REALS):
        m = np.asarray(linalg.matrix_function(a, f, domain))
        return (m + m.T) / 2  # transpose without conjugation

    return broken


def _ntr(a):
    a = np.asarray(a)
    return float(np.trace(a).real) / a.shape[0]


# linear-algebra properties; each returns None or a witness dict

def prop_spectral_mapping(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    funcs = {"exp": np.exp, "abs": np.abs, "cube": lambda w: w ** 3, "sin": np.sin}
    name = list(funcs)[int(rng.integers(len(funcs)))]
    f = funcs[name]
    got = np.sort(np.linalg.eigvalsh(np.asarray(mf(a, f))))
    want = np.sort(f(linalg.eigvalsh(a)))
    if np.max(np.abs(got - want)) > 1e-10 * max(1.0, float(np.max(np.abs(want)))):
        return {"A": a, "f": name, "eig_fA": got, "f_eigA": want}
    return None


def prop_operator_jensen(rng, d, mf):
    xs = [rand_hermitian(rng, d, rng.uniform(0.1, 3.0)) for _ in range(int(rng.integers(1, 6)))]
    m = sum(xs) / len(xs)
    m2 = sum(x @ x for x in xs) / len(xs)
    if not linalg.psd_leq(m @ m, m2, 1e-10):
        return {"X": np.stack(xs)}
    return None


def prop_square_convexity(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    b = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    h = (a + b) / 2
    if not linalg.psd_leq(h @ h, (a @ a + b @ b) / 2, 1e-10):
        return {"A": a, "B": b}
    return None


def prop_holder(rng, d, mf):
    b = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    c = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    for p, q in ((1, math.inf), (2, 2), (3, 1.5)):
        lhs = float(np.trace(b @ c).real)
        rhs = linalg.schatten_norm(b, p) * linalg.schatten_norm(c, q)
        if not _leq(lhs, rhs):
            return {"B": b, "C": c, "p": p, "q": q, "lhs": lhs, "rhs": rhs}
    return None


def prop_schwarz(rng, d, mf):
    ks = [rand_psd(rng, d, rng.uniform(0.1, 2.0)) for _ in range(int(rng.integers(1, 5)))]
    p = float(rng.uniform(1.0, 4.0))
    lhs = linalg.schatten_norm(sum(a @ a for a in ks), p)
    rhs = (math.fsum(linalg.schatten_norm(a, 2 * p) ** (2 * p) for a in ks) ** (1 / (2 * p))
           * linalg.schatten_norm(sum(ks), 2 * p))
    if not _leq(lhs, rhs):
        return {"A": np.stack(ks), "p": p, "lhs": lhs, "rhs": rhs}
    return None


def _mvti(a, b, g, h, hprime, mf):
    dg = np.asarray(mf(a, g)) - np.asarray(mf(b, g))
    dh = np.asarray(mf(a, h)) - np.asarray(mf(b, h))
    lhs = _ntr(dg @ dh)
    rhs = 0.5 * _ntr(dg @ (a - b) @ (np.asarray(mf(a, hprime)) + np.asarray(mf(b, hprime))))
    return lhs, rhs


def prop_mvti_exp_pos(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    b = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    th = float(rng.uniform(0.05, 2.0))
    lhs, rhs = _mvti(a, b, lambda w: w, lambda w: np.exp(th * w), lambda w: th * np.exp(th * w), mf)
    if not _leq(lhs, rhs):
        return {"A": a, "B": b, "theta": th, "lhs": lhs, "rhs": rhs}
    return None


def prop_mvti_exp_neg(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    b = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    th = -float(rng.uniform(0.05, 2.0))
    lhs, rhs = _mvti(a, b, lambda w: w, lambda w: np.exp(th * w), lambda w: th * np.exp(th * w), mf)
    # h' concave: reversed
    if not _leq(rhs, lhs):
        return {"A": a, "B": b, "theta": th, "lhs": lhs, "rhs": rhs}
    return None


def prop_mvti_power(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 2.0))
    b = rand_hermitian(rng, d, rng.uniform(0.1, 2.0))
    p = float(rng.uniform(1.5, 4.0))
    q = 2 * p - 1

    def g(w):
        return np.sign(w) * np.abs(w) ** q

    lhs, rhs = _mvti(a, b, g, g, lambda w: q * np.abs(w) ** (q - 1), mf)
    if not _leq(lhs, rhs):
        return {"A": a, "B": b, "p": p, "lhs": lhs, "rhs": rhs}
    return None


def prop_entropy_young(rng, d, mf):
    v = rand_hermitian(rng, d, rng.uniform(0.1, 3.0))
    w = rand_psd(rng, d)
    w = linalg.hermitian(w / _ntr(w))
    lhs = _ntr(v @ w)
    rhs = linalg.log_ntrace_exp(v) + linalg.entropy_term(w)
    if not _leq(lhs, rhs):
        return {"V": v, "W": w, "lhs": lhs, "rhs": rhs}
    return None


def prop_dilation(rng, d, mf):
    d1 = int(rng.integers(1, d + 1))
    d2 = int(rng.integers(1, d + 1))
    bm = rand_general(rng, d1, d2)
    dil = linalg.hermitian_dilation(bm)
    sq = np.zeros_like(dil)
    sq[:d1, :d1] = bm @ bm.conj().T
    sq[d1:, d1:] = bm.conj().T @ bm
    nb = float(np.linalg.norm(bm, 2))
    if (np.max(np.abs(dil @ dil - sq)) > 1e-12 * max(1.0, nb * nb)
            or abs(linalg.spectral_norm(dil) - nb) > 1e-10 * max(1.0, nb)
            or abs(linalg.lambda_max(dil) - nb) > 1e-10 * max(1.0, nb)):
        return {"B": bm}
    return None


def prop_eig_invariants(rng, d, mf):
    a = rand_hermitian(rng, d, rng.uniform(0.1, 10.0))
    w, q = linalg.eig_hermitian(a)
    rec = (q * w) @ q.conj().T
    tol = 1e-10 * (1 + linalg.spectral_norm(a))
    if (np.max(np.abs(rec - a)) > tol or np.max(np.abs(q.conj().T @ q - np.eye(d))) > 1e-10
            or np.any(np.diff(w) < 0)):
        return {"A": a}
    return None


# Stein pair properties (small enumerable ensembles)

def _ens_witness(ens, **extra):
    out = {"family": ens.family, "spec": ens.to_json()}
    out.update(extra)
    return out


def _stein_case(rng, d, fault):
    ens = random_ensemble(rng, min(d, 3), fault=fault)
    return ens, stein.build_stein_pair(ens)


def prop_stein_residual(rng, d, mf, fault=None):
    fam = "independent_sum" if fault == "noncentered" else None
    ens = random_ensemble(rng, min(d, 3), family=fam, fault=fault)
    model = stein.build_stein_pair(ens)
    state = ens.sample_states(rng, 1)[0]
    r = stein.stein_residual(model, state)
    if r > 1e-10:
        return _ens_witness(ens, state=state, residual=r)
    return None


def prop_conditional_variance(rng, d, mf, fault=None):
    ens, model = _stein_case(rng, d, None)
    state = ens.sample_states(rng, 1)[0]
    a = stein.conditional_variance(model, state)
    b = stein.conditional_variance_generic(model, state)
    if np.max(np.abs(a - b)) > 1e-10 * max(1.0, float(np.max(np.abs(b)))):
        return _ens_witness(ens, state=state, closed_form=a, generic=b)
    return None


def prop_exchangeability(rng, d, mf, fault=None):
    ens, model = _stein_case(rng, d, None)
    gap = stein.exchangeability_gap(model)
    if gap > 1e-12:
        return _ens_witness(ens, gap=gap)
    return None


def prop_pairs_identity(rng, d, mf, fault=None):
    ens, model = _stein_case(rng, d, None)
    funcs = {"identity": lambda x: x, "square": lambda x: x @ x,
             "exp(0.3 x)": lambda x: np.asarray(mf(x, lambda w: np.exp(0.3 * w)))}
    scale = max(1.0, float(np.max(np.abs(ens.enumerate().xs))) ** 2)
    for name, F in funcs.items():
        gap = stein.pairs_identity_gap(model, F)
        if gap > 1e-9 * scale * (math.exp(0.3 * math.sqrt(scale)) if name.startswith("exp") else scale):
            return _ens_witness(ens, F=name, gap=gap)
    return None


def prop_mean_delta(rng, d, mf, fault=None):
    ens, model = _stein_case(rng, d, None)
    gap = stein.mean_delta_gap(model)
    scale = max(1.0, float(np.max(np.abs(ens.enumerate().xs))) ** 2)
    if gap > 1e-10 * scale:
        return _ens_witness(ens, gap=gap)
    return None


def prop_buchholz(rng, d, mf, fault=None):
    for p, lhs, rhs, margin in bounds.buchholz_comparison(20):
        if not margin > 0:
            return {"p": p, "lhs": str(lhs), "rhs": str(rhs)}
    return None


PROPERTIES = [
    ("spectral_mapping", prop_spectral_mapping),
    ("operator_jensen", prop_operator_jensen),
    ("square_convexity", prop_square_convexity),
    ("holder_trace", prop_holder),
    ("schwarz_type", prop_schwarz),
    ("mvti_exp_positive_theta", prop_mvti_exp_pos),
    ("mvti_exp_negative_theta", prop_mvti_exp_neg),
    ("mvti_power", prop_mvti_power),
    ("entropy_young", prop_entropy_young),
    ("dilation_identities", prop_dilation),
    ("eig_invariants", prop_eig_invariants),
]

STEIN_PROPERTIES = [
    ("stein_residual", prop_stein_residual),
    ("conditional_variance_closed_form", prop_conditional_variance),
    ("exchangeability", prop_exchangeability),
    ("exchangeable_pairs_identity", prop_pairs_identity),
    ("mean_delta", prop_mean_delta),
]


def property_suite(seed: int = 0, cases: int = 1000, fault: Optional[str] = None,
                   dims: Sequence[int] = DIMS, only: Optional[Sequence[str]] = None) -> SuiteReport:
    """Run every property for ``cases`` random instances.

    Parameters
    ----------
    fault : {"symmetrize", "noncentered"}, optional
        Deliberate bug for mutation testing: a matrix function that transposes
        without conjugating, or an independent sum with a non-centered summand.
    only : sequence of str, optional
        Restrict to these property names.
    """
    if cases < 1:
        raise ValueError("cases must be >= 1")
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; have {FAULTS}")
    mf = _matrix_function(fault)
    results = []
    table = [(n, f, False) for n, f in PROPERTIES] + [(n, f, True) for n, f in STEIN_PROPERTIES]
    table.append(("buchholz_constant", prop_buchholz, True))
    for idx, (name, func, is_stein) in enumerate(table):
        if only is not None and name not in only:
            continue
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(idx,))))
        n_cases = 1 if name == "buchholz_constant" else cases
        witness = None
        for _ in range(n_cases):
            d = int(dims[int(rng.integers(len(dims)))])
            witness = func(rng, d, mf, fault) if is_stein else func(rng, d, mf)
            if witness is not None:
                witness = {"dimension": d, **witness}
                break
        results.append(PropertyResult(name, n_cases, witness is None, witness))
    return SuiteReport(seed, cases, results)
