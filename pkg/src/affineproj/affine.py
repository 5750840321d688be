"""2x2 linear algebra, affine maps and validated self-affine IFS construction.

Symbols are 0-based: a system with ``k`` maps uses the alphabet ``0..k-1``.
Words are plain tuples of ints, ``T_w = T_{w[0]} o ... o T_{w[-1]}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DiskInvarianceError, NonContracting, SingularMatrix

Word = tuple[int, ...]


def _to_array(A) -> np.ndarray:
    if isinstance(A, Matrix2):
        return A.as_array()
    return np.asarray(A, dtype=float).reshape(2, 2)


@dataclass(frozen=True)
class Matrix2:
    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"matrix entry {name} is not finite: {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, arr) -> Matrix2:
        a = np.asarray(arr, dtype=float).reshape(2, 2)
        return cls(a[0, 0], a[0, 1], a[1, 0], a[1, 1])

    @classmethod
    def identity(cls) -> Matrix2:
        return cls(1.0, 0.0, 0.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def T(self) -> Matrix2:
        return Matrix2(self.a11, self.a21, self.a12, self.a22)

    def inverse(self) -> Matrix2:
        d = self.det
        if d == 0.0:
            raise SingularMatrix("matrix is singular")
        return Matrix2(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)

    def __matmul__(self, other):
        if isinstance(other, Matrix2):
            return Matrix2.from_array(self.as_array() @ other.as_array())
        return self.as_array() @ np.asarray(other, dtype=float)

    def __mul__(self, c: float) -> Matrix2:
        return Matrix2(c * self.a11, c * self.a12, c * self.a21, c * self.a22)

    __rmul__ = __mul__


def singular_values(A) -> tuple[float, float]:
    """Return ``(alpha1, alpha2)``, the singular values of a 2x2 matrix.

    Uses the closed-form eigenvalues of ``A A^T``; alpha2 is recovered as
    ``|det A| / alpha1`` so that the product identity holds to rounding.
    """
    a1, a2 = singular_values_stack(_to_array(A)[None])
    return float(a1[0]), float(a2[0])


def singular_values_stack(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised singular values for an array of shape ``(..., 2, 2)``."""
    m = np.asarray(mats, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    fro2 = a * a + b * b + c * c + d * d
    det = np.abs(a * d - b * c)
    # eigenvalues of A A^T: fro2/2 +- sqrt(fro2^2/4 - det^2)
    half = 0.5 * fro2
    disc = np.sqrt(np.maximum(half * half - det * det, 0.0))
    alpha1 = np.sqrt(half + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha2 = np.where(alpha1 > 0, det / alpha1, 0.0)
    alpha2 = np.minimum(alpha2, alpha1)
    return alpha1, alpha2


def svf_from_singular_values(alpha1, alpha2, s: float):
    """Singular value function evaluated from precomputed singular values."""
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    alpha1 = np.asarray(alpha1, dtype=float)
    alpha2 = np.asarray(alpha2, dtype=float)
    with np.errstate(divide="ignore"):
        if s <= 1:
            return np.power(alpha1, s)
        if s <= 2:
            return alpha1 * np.power(alpha2, s - 1)
        return np.power(alpha1 * alpha2, s / 2)


def svf(A, s: float) -> float:
    """Singular value function ``phi^s(A)``.

    ``alpha1^s`` for ``s <= 1``, ``alpha1 alpha2^(s-1)`` for ``1 <= s <= 2``
    and ``|det A|^(s/2)`` beyond.
    """
    a1, a2 = singular_values(A)
    return float(svf_from_singular_values(a1, a2, s))


@dataclass(frozen=True)
class AffineMap2:
    linear: Matrix2
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not isinstance(self.linear, Matrix2):
            object.__setattr__(self, "linear", Matrix2.from_array(self.linear))
        t = tuple(float(v) for v in self.translation)
        if len(t) != 2 or not all(math.isfinite(v) for v in t):
            raise ValueError(f"translation must be two finite reals, got {self.translation}")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> AffineMap2:
        return cls(Matrix2.identity(), (0.0, 0.0))

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        return pts @ self.linear.as_array().T + np.asarray(self.translation)

    def compose(self, inner: AffineMap2) -> AffineMap2:
        """``self o inner``."""
        A = self.linear.as_array()
        lin = A @ inner.linear.as_array()
        trans = A @ np.asarray(inner.translation) + np.asarray(self.translation)
        return AffineMap2(Matrix2.from_array(lin), (trans[0], trans[1]))


def _max_image_radius(A: np.ndarray, d: np.ndarray) -> float:
    """max over the unit circle of |A x + d|; the max over the disk is on the circle."""
    ts = np.linspace(0.0, 2 * np.pi, 2048, endpoint=False)
    circle = np.stack([np.cos(ts), np.sin(ts)], axis=1)
    r = np.linalg.norm(circle @ A.T + d, axis=1)
    j = int(np.argmax(r))
    step = ts[1] - ts[0]

    def neg(t):
        return -np.linalg.norm(A @ np.array([np.cos(t), np.sin(t)]) + d)

    res = minimize_scalar(neg, bounds=(ts[j] - step, ts[j] + step), method="bounded",
                          options={"xatol": 1e-13})
    return max(float(r[j]), float(-res.fun))


def _ellipses_disjoint(lin: np.ndarray, trans: np.ndarray, n_boundary: int = 2048) -> bool:
    """Whether the first-level ellipses ``T_i(D)`` are pairwise disjoint (sampled boundary test)."""
    k = len(lin)
    if k == 1:
        return True
    if np.any(np.linalg.det(lin) == 0):
        return False
    ts = np.linspace(0.0, 2 * np.pi, n_boundary, endpoint=False)
    circle = np.stack([np.cos(ts), np.sin(ts)], axis=1)
    inv = np.linalg.inv(lin)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            boundary_j = circle @ lin[j].T + trans[j]
            # boundary of T_j(D) expressed in the coordinates of T_i(D)
            pre = (boundary_j - trans[i]) @ inv[i].T
            if np.min(np.linalg.norm(pre, axis=1)) <= 1.0:
                return False
            if np.linalg.norm(inv[j] @ (trans[i] - trans[j])) <= 1.0:
                return False
    return True


@dataclass(frozen=True)
class ValidationReport:
    norms: tuple[float, ...]
    non_positive: tuple[int, ...]
    non_contracting: tuple[int, ...]
    max_image_radius: float
    strongly_separated: bool = False
    rescale_factor: float | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SelfAffineIFS:
    """A validated system of planar affine contractions.

    Build instances with :func:`validate_ifs`; constructing directly also
    computes the flags but never rescales.
    """

    maps: tuple[AffineMap2, ...]
    strictly_positive: bool = field(init=False)
    contracting: bool = field(init=False)
    disk_invariant: bool = field(init=False)
    report: ValidationReport = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) < 1:
            raise ValueError("an IFS needs at least one map")
        object.__setattr__(self, "maps", maps)
        lin = np.stack([m.linear.as_array() for m in maps])
        trans = np.array([m.translation for m in maps], dtype=float)
        lin.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "_linear", lin)
        object.__setattr__(self, "_translations", trans)

        norms, _ = singular_values_stack(lin)
        non_pos = tuple(i for i in range(len(maps)) if not np.all(lin[i] > 0))
        non_con = tuple(i for i in range(len(maps)) if not norms[i] < 1)
        radius = max(_max_image_radius(lin[i], trans[i]) for i in range(len(maps)))
        warnings = []
        if non_pos:
            warnings.append("not strictly positive: maps " + ", ".join(map(str, non_pos)))
        object.__setattr__(self, "strictly_positive", not non_pos)
        object.__setattr__(self, "contracting", not non_con)
        object.__setattr__(self, "disk_invariant", radius <= 1 + 1e-12)
        object.__setattr__(self, "report", ValidationReport(
            norms=tuple(float(n) for n in norms), non_positive=non_pos,
            non_contracting=non_con, max_image_radius=radius,
            strongly_separated=_ellipses_disjoint(lin, trans), warnings=tuple(warnings)))

    @property
    def k(self) -> int:
        return len(self.maps)

    @property
    def linear(self) -> np.ndarray:
        """Read-only stack of linear parts, shape ``(k, 2, 2)``."""
        return self._linear

    @property
    def translations(self) -> np.ndarray:
        """Read-only stack of translations, shape ``(k, 2)``."""
        return self._translations

    @classmethod
    def from_arrays(cls, linear, translations=None, **kwargs) -> SelfAffineIFS:
        lin = np.asarray(linear, dtype=float).reshape(-1, 2, 2)
        trans = (np.zeros((len(lin), 2)) if translations is None
                 else np.asarray(translations, dtype=float).reshape(-1, 2))
        maps = [AffineMap2(Matrix2.from_array(A), tuple(d)) for A, d in zip(lin, trans)]
        return validate_ifs(maps, **kwargs)

    def scaled_translations(self, factor: float) -> SelfAffineIFS:
        maps = [AffineMap2(m.linear, (factor * m.translation[0], factor * m.translation[1]))
                for m in self.maps]
        return SelfAffineIFS(tuple(maps))


def validate_ifs(maps: Iterable[AffineMap2], rescale_to_disk: bool = False) -> SelfAffineIFS:
    """Validate maps into a :class:`SelfAffineIFS`.

    Raises :class:`NonContracting` if some linear part has operator norm >= 1.
    Missing positivity is only recorded as a flag. With ``rescale_to_disk``,
    translations are multiplied by ``(1 - max|A_i|) / max|d_i|`` when the unit
    disk is not already invariant.
    """
    maps = tuple(m if isinstance(m, AffineMap2) else AffineMap2(*m) for m in maps)
    if not maps:
        raise ValueError("an IFS needs at least one map")
    ifs = SelfAffineIFS(maps)
    if not ifs.contracting:
        idx = ifs.report.non_contracting
        raise NonContracting(idx, [ifs.report.norms[i] for i in idx])
    if rescale_to_disk and not ifs.disk_invariant:
        dmax = float(np.max(np.linalg.norm(ifs.translations, axis=1)))
        factor = (1.0 - max(ifs.report.norms)) / dmax
        rescaled = ifs.scaled_translations(factor)
        report = rescaled.report
        object.__setattr__(rescaled, "report", ValidationReport(
            norms=report.norms, non_positive=report.non_positive,
            non_contracting=report.non_contracting, max_image_radius=report.max_image_radius,
            strongly_separated=report.strongly_separated, rescale_factor=factor,
            warnings=report.warnings + (f"translations rescaled by {factor:.12g}",)))
        return rescaled
    return ifs


def check_word(ifs: SelfAffineIFS, w: Sequence[int]) -> Word:
    w = tuple(int(a) for a in w)
    for a in w:
        if not 0 <= a < ifs.k:
            raise IndexError(f"symbol {a} out of range for {ifs.k} maps")
    return w


def word_matrix(ifs: SelfAffineIFS, w: Sequence[int]) -> np.ndarray:
    """Ordered product ``A_{w[0]} ... A_{w[-1]}`` as an ndarray."""
    M = np.eye(2)
    for a in check_word(ifs, w):
        M = M @ ifs.linear[a]
    return M


def compose_word(ifs: SelfAffineIFS, w: Sequence[int]) -> AffineMap2:
    """The affine map ``T_{w[0]} o ... o T_{w[-1]}``; identity for the empty word."""
    result = AffineMap2.identity()
    for a in check_word(ifs, w):
        result = result.compose(ifs.maps[a])
    return result


@dataclass(frozen=True)
class BernoulliWeights:
    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if not p:
            raise ValueError("weights must be non-empty")
        if any(not math.isfinite(x) or x <= 0 for x in p):
            raise ValueError(f"weights must be positive, got {p}")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got sum {math.fsum(p)!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, k: int) -> BernoulliWeights:
        return cls(tuple([1.0 / k] * k))

    @property
    def k(self) -> int:
        return len(self.p)

    def as_array(self) -> np.ndarray:
        a = np.asarray(self.p)
        return a / a.sum()


def _check_weights(ifs: SelfAffineIFS, weights: BernoulliWeights | None) -> BernoulliWeights:
    if weights is None:
        return BernoulliWeights.uniform(ifs.k)
    if weights.k != ifs.k:
        raise ValueError(f"{weights.k} weights given for {ifs.k} maps")
    return weights


def sample_symbols(rng: np.random.Generator, weights: BernoulliWeights, n: int, depth: int) -> np.ndarray:
    """i.i.d. symbols of shape ``(n, depth)``, drawn column by column.

    Drawing by column keeps the first ``m`` columns identical for every
    ``depth >= m`` under the same generator state.
    """
    p = weights.as_array()
    out = np.empty((n, depth), dtype=np.intp)
    for j in range(depth):
        out[:, j] = rng.choice(len(p), size=n, p=p)
    return out


def apply_words(ifs: SelfAffineIFS, symbols: np.ndarray, x0=None) -> np.ndarray:
    """Evaluate ``T_{s[0]} o ... o T_{s[-1]}(x0)`` for each row ``s`` of ``symbols``."""
    n, depth = symbols.shape
    x = np.zeros((n, 2)) if x0 is None else np.broadcast_to(np.asarray(x0, float), (n, 2)).copy()
    lin, trans = ifs.linear, ifs.translations
    for j in range(depth - 1, -1, -1):
        s = symbols[:, j]
        x = np.einsum("nij,nj->ni", lin[s], x) + trans[s]
    return x


def chaos_game(ifs: SelfAffineIFS, weights: BernoulliWeights | None, n_points: int,
               depth: int, seed: int = 0, prefix: Sequence[int] = ()) -> np.ndarray:
    """Sample the self-affine measure: ``n_points`` values of ``T_{a_1...a_depth}(0)``.

    Words are i.i.d. from the Bernoulli weights. A non-empty ``prefix``
    returns samples of the conditional measure on the cylinder ``[prefix]``.
    Returns an array of shape ``(n_points, 2)``.
    """
    if not ifs.disk_invariant:
        raise DiskInvarianceError("T_i(D) is not contained in D; validate with rescale_to_disk")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    weights = _check_weights(ifs, weights)
    rng = np.random.default_rng(seed)
    symbols = sample_symbols(rng, weights, n_points, depth)
    pts = apply_words(ifs, symbols)
    if prefix:
        pts = compose_word(ifs, prefix)(pts)
    return pts
