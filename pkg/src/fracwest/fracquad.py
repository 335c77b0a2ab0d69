"""Product-trapezoidal quadrature for the Abel integral on a uniform grid.

``(I^beta v)(t) = 1/Gamma(beta) * int_0^t (t-s)^(beta-1) v(s) ds``

The integrand is replaced by its piecewise linear interpolant and the kernel
is integrated exactly, so constants and linear functions are reproduced
without error. For ``beta = 1`` the rule is the composite trapezoid rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int = 2000
    T: float = 2.0

    def __post_init__(self):
        if self.n_steps <= 0 or not self.T > 0:
            raise ValueError("TimeGrid needs n_steps > 0 and T > 0")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights realizing the L2(0,T) inner product on samples."""
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


@dataclass(frozen=True)
class FracWeights:
    """Convolution weights ``w[n, k]`` of the rule, stored in Toeplitz form.

    On a uniform grid ``w[n, k]`` depends only on ``n - k`` for ``1 <= k``;
    only the ``k = 0`` column needs its own table.
    """

    grid: TimeGrid
    beta: float
    lag: np.ndarray = field(repr=False)    # lag[j] = w[n, n-j] for 0 <= j < n
    first: np.ndarray = field(repr=False)  # first[n] = w[n, 0]

    def row(self, n: int) -> np.ndarray:
        """Dense row ``(w[n, 0], ..., w[n, n])``."""
        if not 0 <= n <= self.grid.n_steps:
            raise IndexError(f"step {n} outside 0..{self.grid.n_steps}")
        r = np.empty(n + 1)
        if n:
            r[1:] = self.lag[n - 1::-1]
        r[0] = self.first[n]
        return r


def build_weights(grid: TimeGrid, beta: float) -> FracWeights:
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    N = grid.n_steps
    c = grid.dt ** beta / gamma(beta + 2.0)
    p = beta + 1.0
    j = np.arange(1, N + 1, dtype=float)
    lag = np.empty(N + 1)
    lag[0] = c
    lag[1:] = c * ((j + 1) ** p - 2.0 * j ** p + (j - 1) ** p)
    first = np.zeros(N + 1)
    first[1:] = c * ((j - 1) ** p - (j - beta - 1.0) * j ** beta)
    return FracWeights(grid, float(beta), lag, first)


def implicit_weight(w: FracWeights, n: int) -> float:
    """Coefficient ``w[n, n]`` multiplying the newest sample."""
    if not 0 <= n <= w.grid.n_steps:
        raise IndexError(f"step {n} outside 0..{w.grid.n_steps}")
    return 0.0 if n == 0 else float(w.lag[0])


def apply_history(w: FracWeights, samples, n: int):
    """Known part ``sum_{k<n} w[n, k] v(t_k)`` of the convolution at step ``n``.

    ``samples`` holds at least ``v(t_0..t_{n-1})`` along axis 0; trailing axes
    are carried through, and samples beyond ``n - 1`` are never read.
    """
    if not 0 <= n <= w.grid.n_steps:
        raise IndexError(f"step {n} outside 0..{w.grid.n_steps}")
    samples = np.asarray(samples, dtype=float)
    if n == 0:
        return np.zeros(samples.shape[1:]) if samples.ndim > 1 else 0.0
    if samples.shape[0] < n:
        raise IndexError(f"need {n} history samples, got {samples.shape[0]}")
    out = w.first[n] * samples[0]
    if n > 1:
        # lag[n-k] for k = 1..n-1
        out = out + np.tensordot(w.lag[n - 1:0:-1], samples[1:n], axes=(0, 0))
    return out


def integrate(w: FracWeights, samples) -> np.ndarray:
    """Apply the full rule at every grid point: returns ``(I^beta v)(t_n)`` for all n."""
    samples = np.asarray(samples, dtype=float)
    out = np.empty_like(samples)
    for n in range(samples.shape[0]):
        out[n] = apply_history(w, samples, n) + implicit_weight(w, n) * samples[n]
    return out
