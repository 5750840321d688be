"""Skew product, suspension flow with roof ``|a_1|_theta`` and the equidistribution test.

The base map is ``T(a, theta) = (shift(a), phi_{a_1}(theta))``. The flow moves
``t`` up to the roof and then jumps to ``(shift(a), phi_{a_1}(theta), 0)``; the jump
is taken eagerly, so a state always has ``t < roof``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .affine import BernoulliWeights, SelfAffineIFS, _check_weights
from .errors import ExceptionalDirection, SequenceExhausted
from .projection import single_lengths
from .projective import (Direction, EmpiricalDirectionMeasure, _angle, _require_positive, act,
                         bin_masses, direction_distance, exceptional_set, furstenberg_sample,
                         inverse_stack)


class SymbolTape:
    """Lazily extended i.i.d. symbol sequence, deterministic given ``seed``."""

    def __init__(self, weights: BernoulliWeights, seed, chunk: int = 4096, limit: int | None = None):
        self._rng = np.random.default_rng(seed)
        self._p = weights.as_array()
        self._chunk = chunk
        self._limit = limit
        self._buf: list[int] = []

    def _extend(self, upto: int) -> None:
        while len(self._buf) <= upto:
            if self._limit is not None and len(self._buf) >= self._limit:
                raise SequenceExhausted(f"symbol tape limited to {self._limit} symbols")
            self._buf.extend(self._rng.choice(len(self._p), size=self._chunk, p=self._p).tolist())
            if self._limit is not None:
                del self._buf[self._limit:]

    def __getitem__(self, i: int) -> int:
        self._extend(i)
        return self._buf[i]

    def __iter__(self):
        i = 0
        while True:
            try:
                yield self[i]
            except SequenceExhausted:
                return
            i += 1

    def prefix(self, n: int) -> list[int]:
        if n > 0:
            self._extend(n - 1)
        return self._buf[:n]


def _symbol(symbols, offset: int) -> int:
    try:
        return int(symbols[offset])
    except IndexError:
        raise SequenceExhausted(f"no symbol at offset {offset}") from None


@dataclass(frozen=True)
class FlowState:
    symbol_offset: int
    theta: Direction
    t: float = 0.0


class _Kernel:
    """Per-map constants for fast scalar steps."""

    def __init__(self, ifs: SelfAffineIFS):
        self.inv = [tuple(M.ravel()) for M in inverse_stack(ifs)]
        self.lin_t = [tuple(A.T.ravel()) for A in ifs.linear]

    def phi(self, a: int, theta: float) -> float:
        m00, m01, m10, m11 = self.inv[a]
        c, s = math.cos(theta), math.sin(theta)
        return math.atan2(m10 * c + m11 * s, m00 * c + m01 * s) % math.pi

    def roof(self, a: int, theta: float) -> float:
        b00, b01, b10, b11 = self.lin_t[a]
        ux, uy = -math.sin(theta), math.cos(theta)
        return -math.log2(math.hypot(b00 * ux + b01 * uy, b10 * ux + b11 * uy))


def skew_step(ifs: SelfAffineIFS, symbols: Sequence[int], offset: int, theta) -> tuple[int, Direction]:
    a = _symbol(symbols, offset)
    return offset + 1, Direction(float(act(inverse_stack(ifs)[a], _angle(theta))))


def roof(ifs: SelfAffineIFS, symbol: int, theta) -> float:
    """Roof height ``|symbol|_theta`` in bits."""
    if not 0 <= symbol < ifs.k:
        raise IndexError(f"symbol {symbol} out of range for {ifs.k} maps")
    return float(single_lengths(ifs, [_angle(theta)])[symbol, 0])


def _flow(kern: _Kernel, symbols, offset: int, theta: float, t: float, s: float) -> tuple[int, float, float]:
    remaining = s
    while True:
        a = _symbol(symbols, offset)
        R = kern.roof(a, theta)
        gap = R - t
        if remaining < gap:
            return offset, theta, t + remaining
        remaining -= gap
        theta = kern.phi(a, theta)
        offset += 1
        t = 0.0


def flow_to_time(ifs: SelfAffineIFS, symbols: Sequence[int], state: FlowState, s: float) -> FlowState:
    """Advance the suspension flow by time ``s >= 0``."""
    if s < 0:
        raise ValueError("flow time must be non-negative")
    offset, theta, t = _flow(_Kernel(ifs), symbols, state.symbol_offset, state.theta.theta, state.t, s)
    return FlowState(symbol_offset=offset, theta=Direction(theta), t=t)


def time_N_orbit(ifs: SelfAffineIFS, weights: BernoulliWeights | None, theta0, N: float, I: int,
                 seed=0, symbols: Sequence[int] | None = None) -> np.ndarray:
    """Directions of ``psi_{iN}(a, theta0, 0)`` for ``i = 1..I`` as an array of angles.

    The symbol sequence is ``SymbolTape(weights, seed)`` unless ``symbols`` is given.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    weights = _check_weights(ifs, weights)
    tape = SymbolTape(weights, seed) if symbols is None else symbols
    kern = _Kernel(ifs)
    offset, theta, t = 0, Direction(_angle(theta0)).theta, 0.0
    out = np.empty(I)
    for i in range(I):
        offset, theta, t = _flow(kern, tape, offset, theta, t, N)
        out[i] = theta
    return out


def nu_F_estimate(ifs: SelfAffineIFS, weights: BernoulliWeights | None = None, n_samples: int = 100_000,
                  burn_in: int = 64, seed=0, require_positive: bool = True) -> EmpiricalDirectionMeasure:
    """Roof-weighted Furstenberg atoms: the projective marginal of the flow-invariant measure.

    Atoms come from :func:`furstenberg_sample`; atom ``theta`` is weighted by the
    mean roof ``sum_i p_i |i|_theta``, the conditional expectation of ``|a_1|_theta``
    over the independent first symbol.
    """
    _require_positive(ifs, "nu_F_estimate", require_positive)
    weights = _check_weights(ifs, weights)
    mu_F = furstenberg_sample(ifs, weights, burn_in=burn_in, n_atoms=n_samples, seed=seed,
                              require_positive=require_positive)
    roofs = weights.as_array() @ single_lengths(ifs, mu_F.thetas)
    return EmpiricalDirectionMeasure(mu_F.thetas, roofs / roofs.sum())


def ks_bin_distance(thetas, reference: EmpiricalDirectionMeasure, n_bins: int = 32) -> float:
    """Max gap between cumulative bin masses of equal-weight ``thetas`` and ``reference``."""
    t = np.asarray(thetas, float)
    emp = bin_masses(t, np.full(t.size, 1.0 / t.size), n_bins)
    ref = reference.bin_masses(n_bins)
    return float(np.max(np.abs(np.cumsum(emp) - np.cumsum(ref))))


def _check_good_direction(ifs: SelfAffineIFS, theta0: float, tol: float) -> None:
    exc = exceptional_set(ifs, tol=1e-9)
    if exc is not None and direction_distance(theta0, exc.theta) <= tol:
        raise ExceptionalDirection(f"theta0 = {theta0:.12g} is the exceptional direction {exc.theta:.12g}")


def equidistribution_statistic(ifs: SelfAffineIFS, weights: BernoulliWeights | None, theta0, N: float,
                               I: int, n_bins: int = 32, seed=0,
                               reference: EmpiricalDirectionMeasure | None = None,
                               n_reference: int = 100_000, exceptional_tol: float = 1e-9) -> float:
    """KS-type distance between the time-``N`` orbit of length ``I`` and ``nu_F``.

    ``reference`` may carry a precomputed :func:`nu_F_estimate`; otherwise one is
    drawn with ``n_reference`` samples and seed ``(seed, 1)``.
    """
    theta0 = Direction(_angle(theta0)).theta
    _check_good_direction(ifs, theta0, exceptional_tol)
    weights = _check_weights(ifs, weights)
    if reference is None:
        reference = nu_F_estimate(ifs, weights, n_samples=n_reference, seed=[seed, 1])
    orbit = time_N_orbit(ifs, weights, theta0, N, I, seed=[seed, 0])
    return ks_bin_distance(orbit, reference, n_bins)
