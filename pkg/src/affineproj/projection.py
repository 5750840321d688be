"""Projections of self-affine measures onto lines and entropy-based dimension estimates.

``pi_theta`` collapses lines of direction ``theta`` and reads the coordinate
along ``u_theta = (-sin theta, cos theta)``, so the disk projects onto
``[-1, 1]``. Lengths of words are in bits: ``|w|_theta = -log2(width/2)`` where
``width`` is the length of ``pi_theta(T_w(D))``.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .affine import (BernoulliWeights, SelfAffineIFS, Word, _check_weights, chaos_game, check_word,
                     compose_word, singular_values_stack)
from .errors import AffineProjError, InputNotPositive, SequenceExhausted
from .projective import Direction, _angle, act, direction_distance, exceptional_set, inverse_stack, write_text


class InsufficientAtoms(AffineProjError):
    pass


def unit_normal(theta) -> np.ndarray:
    t = _angle(theta)
    return np.array([-math.sin(t), math.cos(t)])


def project(points, theta) -> np.ndarray:
    """Vectorised ``pi_theta`` for points of shape ``(n, 2)``."""
    return np.asarray(points, float) @ unit_normal(theta)


def project_point(p, theta) -> float:
    return float(np.dot(np.asarray(p, float), unit_normal(theta)))


def projected_width(ifs: SelfAffineIFS, w: Sequence[int], theta) -> float:
    """Length of ``pi_theta(T_w(D))``, i.e. ``2 |A_w^T u_theta|``."""
    v = unit_normal(theta)
    for a in check_word(ifs, w):
        v = ifs.linear[a].T @ v
    return 2.0 * float(np.hypot(v[0], v[1]))


@dataclass(frozen=True)
class LengthFunctionValue:
    word: Word
    theta: Direction
    value: float


def length_value(ifs: SelfAffineIFS, w: Sequence[int], theta) -> float:
    """``|w|_theta`` in bits, accumulated with renormalisation so long words do not underflow."""
    v = unit_normal(theta)
    total = 0.0
    for a in check_word(ifs, w):
        v = ifs.linear[a].T @ v
        n = float(np.hypot(v[0], v[1]))
        total -= math.log2(n)
        v = v / n
    return total


def length(ifs: SelfAffineIFS, w: Sequence[int], theta) -> LengthFunctionValue:
    w = check_word(ifs, w)
    return LengthFunctionValue(word=w, theta=Direction(_angle(theta)), value=length_value(ifs, w, theta))


def single_lengths(ifs: SelfAffineIFS, thetas) -> np.ndarray:
    """``|i|_theta`` for every map ``i`` and angle, shape ``(k, len(thetas))``."""
    t = np.atleast_1d(np.asarray(thetas, float))
    u = np.stack([-np.sin(t), np.cos(t)], axis=-1)
    v = np.einsum("kji,nj->kni", ifs.linear, u)
    return -np.log2(np.hypot(v[..., 0], v[..., 1]))


def lambda_max(ifs: SelfAffineIFS) -> float:
    """``max_{i, theta} |i|_theta = max_i -log2(alpha2(A_i))``."""
    _, a2 = singular_values_stack(ifs.linear)
    return float(np.max(-np.log2(a2)))


def f_contraction(ifs: SelfAffineIFS, i: int, theta) -> tuple[float, float]:
    """Signed ratio and offset of ``f_{i,theta}`` with ``pi_theta(T_i p) = f(pi_{phi_i(theta)} p)``."""
    if not 0 <= i < ifs.k:
        raise IndexError(f"map index {i} out of range for {ifs.k} maps")
    u = unit_normal(theta)
    v = ifs.linear[i].T @ u
    theta_i = float(act(inverse_stack(ifs)[i], _angle(theta)))
    ratio = float(np.dot(v, unit_normal(theta_i)))
    offset = float(np.dot(ifs.translations[i], u))
    return ratio, offset


@dataclass(frozen=True)
class StoppingPoint:
    """State of the walk at the stopping index ``n_j``."""

    j: int
    n: int
    length: float
    theta: float  # phi_{a_n ... a_1}(theta0)
    theta_before: float  # phi_{a_{n-1} ... a_1}(theta0)


def stopping_walk(ifs: SelfAffineIFS, symbols: Iterable[int], theta, N: float) -> Iterator[StoppingPoint]:
    """Yield ``n_j`` with ``|a_1..a_{n_j - 1}| < N j <= |a_1..a_{n_j}|`` for ``j = 1, 2, ...``.

    Lengths are advanced one symbol at a time through the cocycle
    ``|w a| - |w| = |a|_{phi_{w reversed}(theta)}``. Several consecutive ``j`` share
    the same ``n_j`` when one symbol crosses more than one level.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    inv = inverse_stack(ifs)
    lin = ifs.linear
    cur = _angle(theta)
    total = 0.0
    n = 0
    j = 1
    for a in symbols:
        u = np.array([-math.sin(cur), math.cos(cur)])
        v = lin[a].T @ u
        total -= math.log2(math.hypot(v[0], v[1]))
        prev = cur
        cur = float(act(inv[a], cur))
        n += 1
        while total >= N * j:
            yield StoppingPoint(j=j, n=n, length=total, theta=cur, theta_before=prev)
            j += 1


def symbol_stream(weights: BernoulliWeights, seed, chunk: int = 4096) -> Iterator[int]:
    """Endless i.i.d. symbol stream, deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    p = weights.as_array()
    while True:
        yield from rng.choice(len(p), size=chunk, p=p).tolist()


def stopping_indices(ifs: SelfAffineIFS, symbols: Iterable[int], theta, N: float, count: int) -> list[int]:
    """The first ``count`` stopping indices ``n_1 <= n_2 <= ...``."""
    out = []
    if count <= 0:
        return out
    for pt in stopping_walk(ifs, symbols, theta, N):
        out.append(pt.n)
        if len(out) == count:
            return out
    raise SequenceExhausted(f"symbols ran out after {len(out)} of {count} stopping indices")


@dataclass(frozen=True)
class AtomicMeasure1D:
    """Finitely supported probability measure on ``[-1, 1]``."""

    x: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, float).ravel()
        w = np.asarray(self.weights, float).ravel()
        if x.shape != w.shape or x.size == 0:
            raise ValueError("positions and weights must be non-empty and of equal length")
        if np.any(np.abs(x) > 1 + 1e-9):
            raise ValueError("atoms must lie in [-1, 1]")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be positive and sum to 1")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform_atoms(cls, x) -> AtomicMeasure1D:
        x = np.asarray(x, float).ravel()
        return cls(x, np.full(x.size, 1.0 / x.size))

    def scaled(self, rho: float) -> AtomicMeasure1D:
        """Push-forward under ``x -> rho x``."""
        return AtomicMeasure1D(rho * self.x, self.weights)

    def mean(self) -> float:
        return float(np.dot(self.x, self.weights))


class _SortedAtoms:
    """Sorted positions with cumulative weights for repeated ball-mass queries."""

    def __init__(self, x, w=None):
        x = np.asarray(x, float)
        order = np.argsort(x, kind="stable")
        self.x = x[order]
        self.w = np.full(x.size, 1.0 / x.size) if w is None else np.asarray(w, float)[order]
        self.cum = np.concatenate([[0.0], np.cumsum(self.w)])

    def ball_masses(self, r: float) -> np.ndarray:
        lo = np.searchsorted(self.x, self.x - r, side="left")
        hi = np.searchsorted(self.x, self.x + r, side="right")
        return self.cum[hi] - self.cum[lo]

    def entropy(self, r: float) -> float:
        m = np.maximum(self.ball_masses(r), self.w)
        return max(0.0, float(-np.dot(self.w, np.log(m))))

    def mean_ball_mass(self, r: float) -> float:
        return float(np.dot(self.w, self.ball_masses(r)))


def r_entropy(nu: AtomicMeasure1D, r: float) -> float:
    """``H_r(nu) = -sum_x w_x log nu([x - r, x + r])`` in nats."""
    if r <= 0:
        raise ValueError("r must be positive")
    return _SortedAtoms(nu.x, nu.weights).entropy(r)


def rescaled_entropy_identity_check(nu: AtomicMeasure1D, rho: float, r: float, tol: float = 1e-12) -> bool:
    """Check ``H_r(S_rho nu) == H_{r/rho}(nu)`` for the scaling ``S_rho x = rho x``."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    return abs(r_entropy(nu.scaled(rho), r) - r_entropy(nu, r / rho)) <= tol


def projected_measure(ifs: SelfAffineIFS, weights: BernoulliWeights | None, theta,
                      n_atoms: int = 100_000, depth: int = 40, seed=0) -> AtomicMeasure1D:
    """Equal-weight atoms of ``pi_theta(mu)`` from chaos-game samples."""
    pts = chaos_game(ifs, weights, n_atoms, depth, seed)
    return AtomicMeasure1D.uniform_atoms(np.clip(project(pts, theta), -1.0, 1.0))


def radius_grid(r_min: float, r_max: float, n_r: int) -> np.ndarray:
    return np.geomspace(r_min, r_max, n_r)


def local_dimension_estimate(nu: AtomicMeasure1D, r_min: float, r_max: float,
                             n_r: int = 8) -> tuple[float, float]:
    """Least-squares slope of ``H_r`` against ``-log r`` on a geometric grid, with its standard error."""
    if not 0 < r_min < r_max < 1:
        raise ValueError("need 0 < r_min < r_max < 1")
    if n_r < 4:
        raise ValueError("n_r must be >= 4")
    if np.ptp(nu.x) == 0:
        return 0.0, 0.0
    atoms = _SortedAtoms(nu.x, nu.weights)
    radii = radius_grid(r_min, r_max, n_r)
    H = np.array([atoms.entropy(r) for r in radii])
    return _slope(-np.log(radii), H)


def _slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / sxx) if dof > 0 else 0.0
    return slope, stderr


@dataclass(frozen=True)
class ThetaScanRow:
    theta: Direction
    beta_hat: float
    stderr: float
    r_min: float
    r_max: float
    n_atoms: int
    is_near_exceptional: bool = False


@dataclass(frozen=True)
class EstimatorParams:
    n_atoms: int = 100_000
    depth: int = 40
    r_min: float = 2.0**-11
    r_max: float = 2.0**-4
    n_r: int = 8


BETA_RANGE = (0.0, 1.2)


def theta_grid(n_theta: int) -> np.ndarray:
    """Uniform grid ``j pi / n_theta`` on ``[0, pi)``."""
    return np.arange(n_theta) * (math.pi / n_theta)


def _exceptional_or_none(ifs: SelfAffineIFS) -> Direction | None:
    try:
        return exceptional_set(ifs)
    except InputNotPositive:
        return None


def theta_scan(ifs: SelfAffineIFS, weights: BernoulliWeights | None = None, n_theta: int = 64,
               params: EstimatorParams = EstimatorParams(), seed: int = 0,
               include_exceptional: bool = False, workers: int = 1) -> list[ThetaScanRow]:
    """Estimate the dimension of ``pi_theta(mu)`` on a uniform grid of directions.

    Row ``j`` uses its own chaos-game sample seeded by ``(seed, j)``. Rows within
    one grid step of the exceptional direction are flagged; with
    ``include_exceptional`` that direction is added as an extra row. Rows are
    independent, so the table does not depend on ``workers``.
    """
    weights = _check_weights(ifs, weights)
    exc = _exceptional_or_none(ifs)
    thetas = list(theta_grid(n_theta))
    if include_exceptional and exc is not None:
        thetas.append(exc.theta)
    spacing = math.pi / n_theta

    def row(j: int) -> ThetaScanRow:
        t = thetas[j]
        nu = projected_measure(ifs, weights, t, params.n_atoms, params.depth, seed=[seed, j])
        beta, se = local_dimension_estimate(nu, params.r_min, params.r_max, params.n_r)
        near = exc is not None and direction_distance(t, exc.theta) <= spacing * (1 + 1e-9)
        return ThetaScanRow(theta=Direction(t), beta_hat=float(np.clip(beta, *BETA_RANGE)),
                            stderr=se, r_min=params.r_min, r_max=params.r_max,
                            n_atoms=params.n_atoms, is_near_exceptional=bool(near))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, range(len(thetas))))
    return [row(j) for j in range(len(thetas))]


SCAN_HEADER = "theta,beta_hat,stderr,r_min,r_max,n_atoms,is_near_exceptional"


def scan_to_csv(rows: Sequence[ThetaScanRow], dest=None) -> str:
    buf = io.StringIO()
    buf.write(SCAN_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.theta.theta:.9g},{r.beta_hat:.9g},{r.stderr:.9g},{r.r_min:.9g},"
                  f"{r.r_max:.9g},{r.n_atoms},{'true' if r.is_near_exceptional else 'false'}\n")
    text = buf.getvalue()
    write_text(dest, text)
    return text


@dataclass(frozen=True)
class EntropyAverage:
    value: float
    N: float
    n_terms: int
    n_used: int
    truncated_at: int | None
    entropies: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)


MIN_BALL_OCCUPANCY = 20
MIN_DIRECT_RADIUS = 1e-11


def entropy_average_statistic(ifs: SelfAffineIFS, weights: BernoulliWeights | None, theta, N: float,
                              n_terms: int, n_atoms: int = 20_000, depth: int = 40, seed: int = 0,
                              method: str = "rescaled") -> EntropyAverage:
    """``(1/(N log 2)) (1/n) sum_i H_{2^{-(i+1)N}}(pi_theta(mu_[a_1..a_{n_i}]))`` along one random sequence.

    One symbol sequence (seed ``(seed, 0)``) fixes the stopping indices; one
    chaos-game sample of ``mu`` (seed ``(seed, 1)``) is shared by all terms.

    ``method="direct"`` pushes the sample through ``T_{a_1..a_{n_i}}`` and projects in
    direction ``theta``; this loses all precision once the cylinders shrink below
    rounding. ``method="rescaled"`` evaluates the same quantity as
    ``H_{2^{|a_1..a_{n_i}| - (i+1)N}}`` of the sample projected in direction
    ``phi_{a_{n_i}..a_1}(theta)``, which is exact at every depth. Terms stop
    once a ball holds fewer than ``MIN_BALL_OCCUPANCY`` atoms on average.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if n_terms < 10:
        raise ValueError("n_terms must be >= 10")
    if method not in ("rescaled", "direct"):
        raise ValueError(f"unknown method {method!r}")
    weights = _check_weights(ifs, weights)
    theta0 = _angle(theta)
    stream = symbol_stream(weights, [seed, 0])
    pts = chaos_game(ifs, weights, n_atoms, depth, seed=[seed, 1])

    consumed: list[int] = []

    def recording(it):
        for a in it:
            consumed.append(a)
            yield a

    H, radii, dirs, lens = [], [], [], []
    truncated_at = None
    for pt in stopping_walk(ifs, recording(stream), theta0, N):
        i = pt.j
        if i > n_terms:
            break
        if method == "rescaled":
            y = project(pts, pt.theta)
            r = 2.0 ** (pt.length - (i + 1) * N)
        else:
            r = 2.0 ** (-(i + 1) * N)
            if r < MIN_DIRECT_RADIUS:
                truncated_at = i
                break
            y = project(compose_word(ifs, consumed[:pt.n])(pts), theta0)
        atoms = _SortedAtoms(y)
        if n_atoms * atoms.mean_ball_mass(r) < MIN_BALL_OCCUPANCY:
            truncated_at = i
            break
        H.append(atoms.entropy(r))
        radii.append(r)
        dirs.append(pt.theta)
        lens.append(pt.length)
    if not H:
        raise InsufficientAtoms(f"no reliable term: ball occupancy below {MIN_BALL_OCCUPANCY} at i = 1")
    H = np.array(H)
    value = float(H.sum() / (N * math.log(2) * len(H)))
    return EntropyAverage(value=value, N=N, n_terms=n_terms, n_used=len(H), truncated_at=truncated_at,
                          entropies=H, radii=np.array(radii), directions=np.array(dirs),
                          lengths=np.array(lens))
