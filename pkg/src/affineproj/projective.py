"""Dynamics on the projective line: the maps phi_i, Furstenberg measures, exceptional direction.

A direction is an angle in ``[0, pi)``: the line through the origin spanned by
``(cos theta, sin theta)``. ``phi_i`` is the action of ``A_i^{-1}``; for
strictly positive matrices it maps the cone of negative-slope lines
``Q2 = (pi/2, pi)`` into itself.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .affine import BernoulliWeights, SelfAffineIFS, _check_weights, _to_array, sample_symbols
from .errors import EstimateNotContracting, InputNotPositive, NotStrictlyPositive, SingularMatrix

Q2 = (math.pi / 2, math.pi)


def _angle(theta) -> float:
    return float(theta.theta if isinstance(theta, Direction) else theta)


@dataclass(frozen=True)
class Direction:
    theta: float

    def __post_init__(self):
        t = float(self.theta)
        if not math.isfinite(t):
            raise ValueError(f"angle must be finite, got {t}")
        t = math.fmod(t, math.pi)
        if t < 0:
            t += math.pi
        if t >= math.pi:
            t = 0.0
        object.__setattr__(self, "theta", t)

    def distance(self, other) -> float:
        return direction_distance(self.theta, _angle(other))

    def unit(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    def __float__(self) -> float:
        return self.theta


def direction_distance(a, b):
    """Metric on the projective line: ``min(|a-b|, pi-|a-b|)`` after reduction mod pi."""
    d = np.abs(np.mod(np.asarray(a, float), np.pi) - np.mod(np.asarray(b, float), np.pi))
    out = np.minimum(d, np.pi - d)
    return float(out) if np.ndim(out) == 0 else out


def in_q2(theta) -> np.ndarray | bool:
    t = np.mod(np.asarray(theta, float), np.pi)
    out = (t > Q2[0]) & (t < Q2[1])
    return bool(out) if np.ndim(out) == 0 else out


def act(M: np.ndarray, thetas) -> np.ndarray:
    """Vectorised projective action of ``M`` (shape ``(2,2)`` or ``(n,2,2)``) on angles."""
    thetas = np.asarray(thetas, float)
    c, s = np.cos(thetas), np.sin(thetas)
    M = np.asarray(M, float)
    x = M[..., 0, 0] * c + M[..., 0, 1] * s
    y = M[..., 1, 0] * c + M[..., 1, 1] * s
    return np.mod(np.arctan2(y, x), np.pi)


def projective_action(M, theta) -> Direction:
    """Angle of ``M (cos theta, sin theta)`` reduced mod pi."""
    A = _to_array(M)
    if np.linalg.det(A) == 0:
        raise SingularMatrix("projective action needs an invertible matrix")
    return Direction(float(act(A, _angle(theta))))


def inverse_stack(ifs: SelfAffineIFS) -> np.ndarray:
    dets = np.linalg.det(ifs.linear)
    if np.any(dets == 0):
        raise SingularMatrix(f"singular linear parts: {np.flatnonzero(dets == 0).tolist()}")
    return np.linalg.inv(ifs.linear)


def phi_map(ifs: SelfAffineIFS, i: int, theta) -> Direction:
    """``phi_i(theta)``: the image of the line at angle ``theta`` under ``A_i^{-1}``."""
    if not 0 <= i < ifs.k:
        raise IndexError(f"map index {i} out of range for {ifs.k} maps")
    return projective_action(inverse_stack(ifs)[i], theta)


def phi_word(ifs: SelfAffineIFS, symbols: Sequence[int], theta) -> float:
    """``phi_{s[-1]} o ... o phi_{s[0]}(theta)``: apply the maps in the order listed."""
    inv = inverse_stack(ifs)
    t = _angle(theta)
    for a in symbols:
        t = float(act(inv[a], t))
    return t


def action_derivative(M: np.ndarray, thetas) -> np.ndarray:
    """Derivative of the projective action in the angle coordinate, ``|det M| / |M e_theta|^2``."""
    thetas = np.asarray(thetas, float)
    v = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1) @ np.asarray(M).T
    return abs(np.linalg.det(M)) / np.sum(v * v, axis=-1)


def invariant_arc(ifs: SelfAffineIFS, max_iter: int = 2000) -> tuple[float, float]:
    """Smallest arc of ``Q2`` reached by iterating the hull of ``phi_i(J)`` from ``J = Q2``.

    Converges to the convex hull of the attractor of ``(phi_i)``.
    """
    if not ifs.strictly_positive:
        raise NotStrictlyPositive("the invariant cone needs strictly positive matrices")
    inv = inverse_stack(ifs)
    lo, hi = Q2
    for _ in range(max_iter):
        ends = act(inv, lo), act(inv, hi)
        pts = np.concatenate(ends)
        new_lo, new_hi = float(pts.min()), float(pts.max())
        if abs(new_lo - lo) < 1e-15 and abs(new_hi - hi) < 1e-15:
            lo, hi = new_lo, new_hi
            break
        lo, hi = new_lo, new_hi
    return lo, hi


def cone_contraction_rate(ifs: SelfAffineIFS, n_grid: int = 512, region: str = "attractor") -> float:
    """Largest derivative of the ``phi_i`` in the angle metric.

    ``region="attractor"`` samples the invariant arc carrying the Furstenberg
    measure; ``region="quadrant"`` samples all of ``Q2``, where for strongly
    anisotropic matrices the angle metric need not be contracted near the
    boundary.
    """
    if not ifs.strictly_positive:
        raise NotStrictlyPositive("cone_contraction_rate requires strictly positive matrices")
    if region == "attractor":
        lo, hi = invariant_arc(ifs)
    elif region == "quadrant":
        lo, hi = Q2
    else:
        raise ValueError(f"unknown region {region!r}")
    if hi - lo < 1e-12:
        grid = np.array([0.5 * (lo + hi)])
    else:
        grid = np.linspace(lo, hi, n_grid)
        if region == "quadrant":
            grid = grid[1:-1]
    inv = inverse_stack(ifs)
    rho = max(float(action_derivative(M, grid).max()) for M in inv)
    if rho >= 1:
        raise EstimateNotContracting(f"sampled contraction ratio {rho:.6g} >= 1")
    return rho


@dataclass(frozen=True)
class EmpiricalDirectionMeasure:
    """Weighted atoms on the projective line."""

    thetas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.mod(np.asarray(self.thetas, float).ravel(), np.pi)
        w = np.asarray(self.weights, float).ravel()
        if t.shape != w.shape or t.size == 0:
            raise ValueError("thetas and weights must be non-empty and of equal length")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform_atoms(cls, thetas) -> EmpiricalDirectionMeasure:
        t = np.asarray(thetas, float).ravel()
        return cls(t, np.full(t.size, 1.0 / t.size))

    @property
    def atoms(self) -> list[tuple[Direction, float]]:
        return [(Direction(t), float(w)) for t, w in zip(self.thetas, self.weights)]

    def __len__(self) -> int:
        return self.thetas.size

    def bin_masses(self, n_bins: int) -> np.ndarray:
        return bin_masses(self.thetas, self.weights, n_bins)

    def to_csv(self, dest=None) -> str:
        """Write ``theta,weight`` rows (12 significant digits); returns the text."""
        buf = io.StringIO()
        buf.write("theta,weight\n")
        for t, w in zip(self.thetas, self.weights):
            buf.write(f"{t:.12g},{w:.12g}\n")
        text = buf.getvalue()
        write_text(dest, text)
        return text

    @classmethod
    def from_csv(cls, src) -> EmpiricalDirectionMeasure:
        text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        t = np.array([float(r["theta"]) for r in rows])
        w = np.array([float(r["weight"]) for r in rows])
        return cls(t, w / w.sum())


def write_text(dest, text: str) -> None:
    """Write to a path or a text stream; ``None`` is a no-op."""
    if dest is None:
        return
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


# angles a rounding error below a bin edge are counted in the bin above it, so a point
# mass sitting on an edge is binned the same way whichever code path produced it
BIN_EDGE_GUARD = 1e-9


def bin_masses(thetas, weights, n_bins: int) -> np.ndarray:
    """Mass of each arc ``[j pi/n, (j+1) pi/n)``."""
    t = np.mod(np.asarray(thetas, float), np.pi)
    idx = np.floor(t * (n_bins / np.pi) + BIN_EDGE_GUARD).astype(np.intp) % n_bins
    return np.bincount(idx, weights=np.asarray(weights, float), minlength=n_bins)


def _require_positive(ifs: SelfAffineIFS, what: str, require_positive: bool) -> None:
    if require_positive and not ifs.strictly_positive:
        raise NotStrictlyPositive(f"{what} requires strictly positive matrices")


def furstenberg_sample(ifs: SelfAffineIFS, weights: BernoulliWeights | None = None,
                       burn_in: int = 64, n_atoms: int = 10_000, seed: int = 0,
                       theta0: float = 0.75 * math.pi,
                       require_positive: bool = True) -> EmpiricalDirectionMeasure:
    """Approximate the Furstenberg measure by backward iteration.

    Each atom is ``phi_{a_1} o ... o phi_{a_m}(theta0)`` with ``m = burn_in`` and
    i.i.d. symbols; the innermost map is applied first, so atoms converge
    pointwise as ``m`` grows. Symbol columns are drawn in order, so a longer
    ``burn_in`` with the same seed shares the outer symbols ``a_1..a_m``.
    """
    _require_positive(ifs, "furstenberg_sample", require_positive)
    if burn_in < 1:
        raise ValueError("burn_in must be >= 1")
    weights = _check_weights(ifs, weights)
    rng = np.random.default_rng(seed)
    symbols = sample_symbols(rng, weights, n_atoms, burn_in)
    inv = inverse_stack(ifs)
    v = np.tile(np.array([math.cos(theta0), math.sin(theta0)]), (n_atoms, 1))
    for j in range(burn_in - 1, -1, -1):
        v = np.einsum("nij,nj->ni", inv[symbols[:, j]], v)
        v /= np.hypot(v[:, 0], v[:, 1])[:, None]
    thetas = np.mod(np.arctan2(v[:, 1], v[:, 0]), np.pi)
    return EmpiricalDirectionMeasure.uniform_atoms(thetas)


def stationarity_residual(ifs: SelfAffineIFS, weights: BernoulliWeights | None,
                          nu: EmpiricalDirectionMeasure, n_bins: int = 32) -> float:
    """``max_j |nu(U_j) - sum_i p_i nu(phi_i^{-1} U_j)|`` over ``n_bins`` equal arcs.

    ``nu(phi_i^{-1} U)`` is the mass of atoms whose image under ``phi_i`` lies in
    ``U``, which is exact for atomic measures.
    """
    weights = _check_weights(ifs, weights)
    inv = inverse_stack(ifs)
    lhs = nu.bin_masses(n_bins)
    rhs = np.zeros(n_bins)
    for p, M in zip(weights.as_array(), inv):
        rhs += p * bin_masses(act(M, nu.thetas), nu.weights, n_bins)
    return float(np.max(np.abs(lhs - rhs)))


def dominant_eigendirection(A) -> float:
    """Angle of the eigenvector of the larger-modulus eigenvalue of a real 2x2 matrix."""
    M = _to_array(A)
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = tr * tr - 4 * det
    if disc < 0:
        raise InputNotPositive("complex eigenvalues; no real dominant eigendirection")
    root = math.sqrt(disc)
    lam_plus, lam_minus = 0.5 * (tr + root), 0.5 * (tr - root)
    if math.isclose(abs(lam_plus), abs(lam_minus), rel_tol=1e-12, abs_tol=0.0):
        raise InputNotPositive("eigenvalues of equal modulus; dominant eigendirection undefined")
    lam = lam_plus if abs(lam_plus) > abs(lam_minus) else lam_minus
    v1 = np.array([M[0, 1], lam - M[0, 0]])
    v2 = np.array([lam - M[1, 1], M[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    return float(np.mod(math.atan2(v[1], v[0]), math.pi))


def exceptional_set(ifs: SelfAffineIFS, tol: float = 1e-9) -> Direction | None:
    """The common dominant eigendirection of all ``A_i``, or ``None`` if they differ.

    When a direction is returned, the good set of directions is the projective
    line minus that direction.
    """
    dirs = [dominant_eigendirection(A) for A in ifs.linear]
    for a in dirs:
        for b in dirs:
            if direction_distance(a, b) > tol:
                return None
    return Direction(dirs[0])
