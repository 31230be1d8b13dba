"""Range-kernel families, their h-rescaling, and the intensity flux.

A range kernel weights pairs of intensity values by their difference.  All
families are evaluated through the rescaling K_h(xi) = K(xi / h), where h > 0
is the window size in intensity units.  The flux phi(xi) = K_h(xi) * xi is the
quantity the nonlocal dynamics actually integrates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAUSSIAN = "gaussian"
HISTOGRAM = "histogram_prescription"
CUSTOM_TABLE = "custom_table"

_FAMILIES = (GAUSSIAN, HISTOGRAM, CUSTOM_TABLE)

# sup over t of |(1 - 2 t^2) exp(-t^2)|, the dimensionless derivative of the
# gaussian flux, is 1; the bound below adds the magnitude of the interior
# extremum at t^2 = 3/2 and therefore stays valid for every h.
_GAUSSIAN_FLUX_BOUND = 1.0 + 2.0 * math.exp(-1.5)


class KernelError(ValueError):
    """Invalid kernel specification or unsupported kernel operation."""


@dataclass(frozen=True)
class KernelSpec:
    """A range kernel family together with its window size.

    Attributes:
        family: one of "gaussian", "histogram_prescription", "custom_table".
        h: window size, > 0, in intensity units.
        epsilon: regularization scale of the histogram-prescription kernel,
            in intensity units (the singular kernel 1_{s<0}/|s| is replaced by
            its bounded approximation; see ``eval``).
        table_x: sample abscissae of a custom kernel, in units of xi / h.
        table_y: kernel values at ``table_x`` (nonnegative).
        table_dy: optional dK/ds samples at ``table_x``; required for
            derivative-based operations on custom tables.
    """

    family: str
    h: float
    epsilon: float = 0.255
    table_x: np.ndarray | None = field(default=None, repr=False)
    table_y: np.ndarray | None = field(default=None, repr=False)
    table_dy: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if not (self.h > 0.0 and math.isfinite(self.h)):
            raise KernelError(f"window size h must be positive, got {self.h}")
        if self.family == HISTOGRAM and not self.epsilon > 0.0:
            raise KernelError("histogram kernel needs epsilon > 0")
        if self.family == CUSTOM_TABLE:
            if self.table_x is None or self.table_y is None:
                raise KernelError("custom_table kernel needs table_x and table_y")
            x = np.asarray(self.table_x, dtype=float)
            y = np.asarray(self.table_y, dtype=float)
            if x.ndim != 1 or x.size < 2 or y.shape != x.shape:
                raise KernelError("kernel table must be two 1-d arrays of equal length >= 2")
            if np.any(np.diff(x) <= 0.0):
                raise KernelError("kernel table abscissae must be strictly increasing")
            if np.any(y < 0.0):
                raise KernelError("kernel table values must be nonnegative")
            if self.table_dy is not None and np.asarray(self.table_dy).shape != x.shape:
                raise KernelError("table_dy must match table_x in shape")
            object.__setattr__(self, "table_x", x)
            object.__setattr__(self, "table_y", y)
            if self.table_dy is not None:
                object.__setattr__(self, "table_dy", np.asarray(self.table_dy, dtype=float))

    # -- factories -----------------------------------------------------

    @classmethod
    def gaussian(cls, h: float) -> "KernelSpec":
        """K(s) = exp(-s^2), so K_h(xi) = exp(-xi^2 / h^2)."""
        return cls(GAUSSIAN, h)

    @classmethod
    def histogram(cls, h: float, epsilon: float) -> "KernelSpec":
        """Regularized contrast-enhancement kernel.

        Approximates K(s) = sign^-(s)/s (nonzero only for negative s) by the
        bounded kernel (-s) / (s^2 + eps_s^2) with eps_s = epsilon / h, which
        restores the Lipschitz regularity the solver relies on.  ``epsilon``
        is in intensity units; a practical default is 1e-3 of the dynamic
        range of the data.
        """
        return cls(HISTOGRAM, h, epsilon=epsilon)

    @classmethod
    def from_table(cls, h: float, x, y, dy=None) -> "KernelSpec":
        """Piecewise-linear kernel sampled in the rescaled variable s = xi/h."""
        return cls(CUSTOM_TABLE, h, table_x=np.asarray(x, dtype=float),
                   table_y=np.asarray(y, dtype=float),
                   table_dy=None if dy is None else np.asarray(dy, dtype=float))


def evaluate(spec: KernelSpec, xi):
    """K_h(xi) = K(xi / h).  Vectorized over ``xi``; always nonnegative."""
    xi = np.asarray(xi, dtype=float)
    s = xi / spec.h
    if spec.family == GAUSSIAN:
        return np.exp(-s * s)
    if spec.family == HISTOGRAM:
        eps_s = spec.epsilon / spec.h
        return np.where(s < 0.0, -s / (s * s + eps_s * eps_s), 0.0)
    return np.interp(s, spec.table_x, spec.table_y)


def evaluate_derivative(spec: KernelSpec, xi):
    """d/dxi K_h(xi).  Custom tables require derivative samples."""
    xi = np.asarray(xi, dtype=float)
    s = xi / spec.h
    if spec.family == GAUSSIAN:
        return (-2.0 * xi / spec.h**2) * np.exp(-s * s)
    if spec.family == HISTOGRAM:
        eps_s = spec.epsilon / spec.h
        denom = (s * s + eps_s * eps_s) ** 2
        # a.e. derivative; the kink at 0 takes the right-branch value 0
        return np.where(s < 0.0, (s * s - eps_s * eps_s) / denom, 0.0) / spec.h
    if spec.table_dy is None:
        raise KernelError("custom_table kernel has no derivative data")
    inside = (s >= spec.table_x[0]) & (s <= spec.table_x[-1])
    # outside the table the kernel is clamped constant, hence slope 0
    return np.where(inside, np.interp(s, spec.table_x, spec.table_dy), 0.0) / spec.h


def phi(spec: KernelSpec, xi):
    """Flux phi(xi) = K_h(xi) * xi; odd whenever K is even."""
    xi = np.asarray(xi, dtype=float)
    return evaluate(spec, xi) * xi


def lipschitz_bound(spec: KernelSpec) -> float:
    """A valid upper bound for sup |phi'|.

    In the rescaled variable s = xi/h the flux derivative is
    K(s) + K'(s) s, which is independent of h, so the bound is too.
    """
    if spec.family == GAUSSIAN:
        return _GAUSSIAN_FLUX_BOUND
    if spec.family == HISTOGRAM:
        # phi(xi) = -xi^2 h / (xi^2 + epsilon^2) for xi < 0; its derivative
        # -2 h xi eps^2/(xi^2+eps^2)^2 peaks at |xi| = epsilon/sqrt(3)
        return (9.0 / (8.0 * math.sqrt(3.0))) * spec.h / spec.epsilon
    if spec.table_dy is None:
        raise KernelError("custom_table kernel has no derivative data")
    return _table_flux_bound(spec.table_x, spec.table_y, spec.table_dy)


def _table_flux_bound(x: np.ndarray, y: np.ndarray, dy: np.ndarray) -> float:
    # On each table segment K and K' are affine in s, so K(s) + K'(s) s is a
    # quadratic whose extrema sit at segment endpoints or its vertex.
    best = max(abs(y[0]), abs(y[-1]))  # clamped tails: phi' = K(endpoint)
    g = y + dy * x
    best = max(best, float(np.max(np.abs(g))))
    for i in range(x.size - 1):
        x0, x1 = x[i], x[i + 1]
        my = (y[i + 1] - y[i]) / (x1 - x0)
        md = (dy[i + 1] - dy[i]) / (x1 - x0)
        # g(s) = K(s) + K'(s) s = a2 s^2 + a1 s + a0 on the segment
        a2 = md
        a1 = my + dy[i] - md * x0
        a0 = y[i] - my * x0
        if a2 != 0.0:
            v = -a1 / (2.0 * a2)
            if x0 < v < x1:
                best = max(best, abs(a2 * v * v + a1 * v + a0))
    return float(best)


def default_epsilon(dynamic_range: float) -> float:
    """Regularization default: one thousandth of the data's dynamic range."""
    if not dynamic_range > 0.0:
        return 1e-3
    return 1e-3 * dynamic_range
