"""Pressure, affinity dimension, Lyapunov exponents and block-Bernoulli measures."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .affine import (BernoulliWeights, SelfAffineIFS, _check_weights, compose_word,
                     singular_values_stack)
from .errors import BracketError, BudgetExceeded, ConfigError, NotStrictlyPositive

DEFAULT_BUDGET = 10**7
BISECTION_MAX_ITER = 200
S_MAX = 4.0


def word_budget() -> int:
    """Word-enumeration cap, overridable through ``AFFINEPROJ_BUDGET``."""
    raw = os.environ.get("AFFINEPROJ_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"AFFINEPROJ_BUDGET must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"AFFINEPROJ_BUDGET must be a positive integer, got {raw!r}")
    return value


def _check_budget(k: int, n: int, budget: int | None) -> None:
    budget = word_budget() if budget is None else budget
    if k**n > budget:
        raise BudgetExceeded(f"{k}^{n} = {k**n} words exceeds the enumeration budget {budget}")


def word_products(ifs: SelfAffineIFS, n: int, budget: int | None = None) -> np.ndarray:
    """All products ``A_w`` for ``|w| = n`` in lexicographic word order, shape ``(k^n, 2, 2)``."""
    _check_budget(ifs.k, n, budget)
    P = np.eye(2)[None]
    for _ in range(n):
        P = np.einsum("wij,ajk->waik", P, ifs.linear).reshape(-1, 2, 2)
    return P


def _log_singular_values(ifs: SelfAffineIFS, n: int, budget: int | None) -> tuple[np.ndarray, np.ndarray]:
    _check_budget(ifs.k, n, budget)
    return _log_singular_values_cached(ifs, n)


@lru_cache(maxsize=16)
def _log_singular_values_cached(ifs: SelfAffineIFS, n: int) -> tuple[np.ndarray, np.ndarray]:
    # split into prefix/suffix blocks to bound peak memory
    m = n // 2
    prefix = word_products(ifs, m, budget=ifs.k**m)
    suffix = word_products(ifs, n - m, budget=ifs.k**(n - m))
    la1 = np.empty(ifs.k**n)
    la2 = np.empty(ifs.k**n)
    ns = len(suffix)
    block = max(1, 2**20 // ns)
    with np.errstate(divide="ignore"):
        for start in range(0, len(prefix), block):
            chunk = np.einsum("pij,sjk->psik", prefix[start:start + block], suffix).reshape(-1, 2, 2)
            a1, a2 = singular_values_stack(chunk)
            sl = slice(start * ns, start * ns + len(chunk))
            la1[sl] = np.log(a1)
            la2[sl] = np.log(a2)
    la1.setflags(write=False)
    la2.setflags(write=False)
    return la1, la2


def _log_svf(la1: np.ndarray, la2: np.ndarray, s: float) -> np.ndarray:
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    if s == 0:
        return np.zeros_like(la1)
    if s <= 1:
        return s * la1
    if s <= 2:
        with np.errstate(invalid="ignore"):
            return la1 + (s - 1) * la2
    return 0.5 * s * (la1 + la2)


@dataclass(frozen=True)
class PressureEstimate:
    """``value = (1/n) log sum_{|w|=n} phi^s(A_w)`` with subadditive bounds on the limit."""

    s: float
    n: int
    value: float
    upper_bound: float
    lower_bound: float


def log_svf_sum(ifs: SelfAffineIFS, s: float, n: int, budget: int | None = None) -> float:
    """``log sum_{|w|=n} phi^s(A_w)`` by exact enumeration."""
    la1, la2 = _log_singular_values(ifs, n, budget)
    return float(logsumexp(_log_svf(la1, la2, s)))


def pressure(ifs: SelfAffineIFS, s: float, n: int, budget: int | None = None,
             c_est: float | None = None) -> PressureEstimate:
    """Finite-level pressure estimate at exponent ``s``.

    ``c_est`` is the cone constant used for the lower bound; by default it is
    estimated with :func:`cone_constant` for strictly positive systems, and the
    lower bound is ``-inf`` otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    value = log_svf_sum(ifs, s, n, budget) / n
    if c_est is None:
        c_est = _default_cone_constant(ifs)
    lower = value - math.log(c_est) / n if c_est is not None else -math.inf
    return PressureEstimate(s=float(s), n=n, value=value, upper_bound=value, lower_bound=lower)


def _default_cone_constant(ifs: SelfAffineIFS) -> float | None:
    if not ifs.strictly_positive:
        return None
    return cone_constant(ifs, n_max=8, n_pairs=500, seed=0)


def default_level(ifs: SelfAffineIFS, cap: int = 12, max_words: int = 2**16) -> int:
    """Largest word length ``n <= cap`` with ``k^n <= max_words`` (at least 1)."""
    if ifs.k == 1:
        return cap
    n = int(math.floor(math.log(max_words) / math.log(ifs.k) + 1e-12))
    return max(1, min(cap, n))


def _bisect_decreasing(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    if flo <= 0:
        return lo
    if f(hi) >= 0:
        raise BracketError(f"pressure is non-negative at s = {hi}; no root in [{lo}, {hi}]")
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AffinityDimension:
    value: float
    raw: float
    lower: float
    n: int
    clamped: bool
    note: str = ""


def affinity_dimension_report(ifs: SelfAffineIFS, tol: float = 1e-10, n: int | None = None,
                              budget: int | None = None) -> AffinityDimension:
    """Root of the level-``n`` pressure, with a lower bound from the cone constant.

    The root of ``p_n/n`` bounds the affinity dimension from above; the root of
    ``p_n/n - log(c)/n`` bounds it from below.
    """
    n = default_level(ifs) if n is None else n
    la1, la2 = _log_singular_values(ifs, n, budget)

    def p(s):
        return float(logsumexp(_log_svf(la1, la2, s))) / n

    raw = _bisect_decreasing(p, 0.0, S_MAX, tol)
    c = _default_cone_constant(ifs)
    if c is None:
        lower = 0.0
    else:
        shift = math.log(c) / n
        lower = _bisect_decreasing(lambda s: p(s) - shift, 0.0, S_MAX, tol)
    clamped = raw > 2
    note = f"raw root {raw:.6g} exceeds 2; reported as 2" if clamped else ""
    return AffinityDimension(value=min(raw, 2.0), raw=raw, lower=min(lower, raw), n=n,
                             clamped=clamped, note=note)


def affinity_dimension(ifs: SelfAffineIFS, tol: float = 1e-10, n: int | None = None,
                       budget: int | None = None) -> float:
    """Affinity dimension by bisection of the level-``n`` pressure over ``[0, 4]``, clamped to ``[0, 2]``."""
    return affinity_dimension_report(ifs, tol=tol, n=n, budget=budget).value


def shannon_entropy(weights: BernoulliWeights) -> float:
    p = weights.as_array()
    return float(-np.sum(p * np.log(p)))


def lyapunov_dimension(entropy: float, lambda1: float, lambda2: float) -> float:
    """Two-branch entropy/exponent formula (unclamped)."""
    if entropy <= -lambda1:
        return entropy / -lambda1
    return 1.0 + (entropy + lambda1) / -lambda2


@dataclass(frozen=True)
class LyapunovReport:
    lambda1: float
    lambda2: float
    entropy: float
    dim_L: float
    dim_L_raw: float
    n_steps: int
    n_samples: int
    std_err: tuple[float, float]
    dim_L_std_err: float
    clamped: bool = False


def _lyapunov_worker(lin: np.ndarray, p: np.ndarray, n_steps: int, n_samples: int,
                     burn_in: int, rng: np.random.Generator) -> np.ndarray:
    log_det = np.log(np.abs(np.linalg.det(lin)))
    v = np.zeros((n_samples, 2))
    v[:, 0] = 1.0
    acc1 = np.zeros(n_samples)
    accd = np.zeros(n_samples)
    k = len(p)
    for step in range(burn_in + n_steps):
        s = rng.choice(k, size=n_samples, p=p)
        v = np.einsum("nij,nj->ni", lin[s], v)
        r = np.hypot(v[:, 0], v[:, 1])
        v /= r[:, None]
        if step >= burn_in:
            acc1 += np.log(r)
            accd += log_det[s]
    lam1 = acc1 / n_steps
    lam2 = accd / n_steps - lam1
    return np.stack([lam1, lam2], axis=1)


def lyapunov_exponents(ifs: SelfAffineIFS, weights: BernoulliWeights | None = None,
                       n_steps: int = 1000, n_samples: int = 100, seed: int = 0,
                       workers: int = 1, burn_in: int = 64) -> LyapunovReport:
    """Monte Carlo Lyapunov exponents of i.i.d. products and the Lyapunov dimension.

    Each sample propagates the unit vector ``e1`` through a random product,
    renormalising every step; ``lambda1`` is the mean log growth and
    ``lambda2 = E log|det| - lambda1``. The first ``burn_in`` steps align the
    vector and are discarded. Samples are split across ``workers`` with seeds
    ``(seed, worker_index)``.
    """
    if n_steps < 100:
        raise ValueError("n_steps must be >= 100")
    if n_samples < 1 or workers < 1:
        raise ValueError("n_samples and workers must be positive")
    weights = _check_weights(ifs, weights)
    p = weights.as_array()
    workers = min(workers, n_samples)
    sizes = [n_samples // workers + (1 if w < n_samples % workers else 0) for w in range(workers)]
    rngs = [np.random.default_rng([seed, w]) for w in range(workers)]
    args = [(ifs.linear, p, n_steps, m, burn_in, g) for m, g in zip(sizes, rngs)]
    if workers == 1:
        parts = [_lyapunov_worker(*args[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _lyapunov_worker(*a), args))
    est = np.concatenate(parts)
    lam1, lam2 = est.mean(axis=0)
    if n_samples > 1:
        cov = np.cov(est, rowvar=False) / n_samples
        se = (float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1])))
    else:
        cov = np.zeros((2, 2))
        se = (0.0, 0.0)
    h = shannon_entropy(weights)
    lam1, lam2 = float(lam1), float(lam2)
    raw = float(lyapunov_dimension(h, lam1, lam2))
    if h <= -lam1:
        grad = np.array([h / lam1**2, 0.0])
    else:
        grad = np.array([-1.0 / lam2, (h + lam1) / lam2**2])
    dim_se = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    dim = min(max(raw, 0.0), 2.0)
    return LyapunovReport(lambda1=lam1, lambda2=lam2, entropy=h, dim_L=dim,
                          dim_L_raw=raw, n_steps=n_steps, n_samples=n_samples, std_err=se,
                          dim_L_std_err=dim_se, clamped=bool(dim != raw))


@dataclass(frozen=True)
class BlockMeasure:
    """Bernoulli measure on blocks of length ``N`` with weights ``phi^{s_N}(A_w)``."""

    N: int
    s_N: float
    words: tuple[tuple[int, ...], ...] = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def as_bernoulli(self, ifs: SelfAffineIFS) -> tuple[SelfAffineIFS, BernoulliWeights]:
        """The same measure as a one-step Bernoulli measure on the block IFS ``{T_w : |w| = N}``."""
        maps = [compose_word(ifs, w) for w in self.words]
        w = self.weights / self.weights.sum()
        return SelfAffineIFS(tuple(maps)), BernoulliWeights(tuple(w))


def block_bernoulli(ifs: SelfAffineIFS, N: int, tol: float = 1e-13,
                    budget: int | None = None) -> BlockMeasure:
    """Solve ``sum_{|w|=N} phi^s(A_w) = 1`` for ``s`` and weight blocks by ``phi^s(A_w)``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    la1, la2 = _log_singular_values(ifs, N, budget)
    s_N = _bisect_decreasing(lambda s: float(logsumexp(_log_svf(la1, la2, s))), 0.0, S_MAX, tol)
    weights = np.exp(_log_svf(la1, la2, s_N))
    words = tuple(itertools.product(range(ifs.k), repeat=N))
    weights.setflags(write=False)
    return BlockMeasure(N=N, s_N=s_N, words=words, weights=weights)


def _random_word_products(lin: np.ndarray, lengths: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    n, n_max = symbols.shape
    M = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    eye = np.eye(2)
    for j in range(n_max):
        step = np.where((j < lengths)[:, None, None], lin[symbols[:, j]], eye)
        M = M @ step
    return M


def sample_word_pairs(ifs: SelfAffineIFS, n_max: int, n_pairs: int, seed: int = 0):
    """Random word pairs ``(lengths_a, sym_a, lengths_b, sym_b)`` with lengths in ``1..n_max``.

    Each stream is drawn from its own generator so that a larger ``n_pairs``
    extends, rather than reshuffles, a smaller draw.
    """
    rl = np.random.default_rng([seed, 0])
    rs = np.random.default_rng([seed, 1])
    lengths = rl.integers(1, n_max + 1, size=(n_pairs, 2))
    symbols = rs.integers(0, ifs.k, size=(n_pairs, 2, n_max))
    return lengths[:, 0], symbols[:, 0], lengths[:, 1], symbols[:, 1]


def cone_ratios(ifs: SelfAffineIFS, n_max: int, n_pairs: int, seed: int = 0) -> np.ndarray:
    """The ratios ``|A_a||A_b| / |A_a A_b|`` over random word pairs."""
    la, sa, lb, sb = sample_word_pairs(ifs, n_max, n_pairs, seed)
    Ma = _random_word_products(ifs.linear, la, sa)
    Mb = _random_word_products(ifs.linear, lb, sb)
    na, _ = singular_values_stack(Ma)
    nb, _ = singular_values_stack(Mb)
    nab, _ = singular_values_stack(Ma @ Mb)
    return na * nb / nab


def cone_constant(ifs: SelfAffineIFS, n_max: int = 8, n_pairs: int = 1000, seed: int = 0) -> float:
    """Estimate ``c >= 1`` with ``|A_a||A_b| <= c |A_a A_b|`` as a running maximum over random pairs."""
    if not ifs.strictly_positive:
        raise NotStrictlyPositive("cone_constant requires strictly positive matrices")
    return float(max(1.0, cone_ratios(ifs, n_max, n_pairs, seed).max()))
