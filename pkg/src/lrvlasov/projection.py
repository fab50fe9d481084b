"""Velocity moments and the moment-conserving decomposition for 1D1V.

The distribution is split as f = carrier + remainder, where the carrier is an
exact three-term object built from the weighted-orthogonal velocity basis
{1, v, v^2 - c} and reproduces the mass, current and kinetic-energy densities
of f; the remainder has zero moments and is the only part rank truncation may
touch.  Moment quadrature uses the plain h_v inner product, while basis
orthogonality lives in the w-weighted product; the two must not be conflated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .grids import VelocityGrid
from .lowrank import LowRankMatrix, add, recompress, scale, truncate_weighted

# remainder moments above this (relative to the carrier moments) trigger one
# re-projection after weighted truncation; cheap, rank +3 worst case
_MOMENT_LEAK_TOL = 1e-12


@dataclass(frozen=True)
class MomentBasis:
    """Weighted-orthogonal velocity basis {1, v, v^2 - c} and its norms."""

    grid: VelocityGrid
    c: float
    norm1_sq: float   # ||1||_w^2
    norm2_sq: float   # ||v||_w^2
    norm3_sq: float   # ||v^2 - c||_w^2

    @classmethod
    def build(cls, grid: VelocityGrid) -> "MomentBasis":
        w, v = grid.w, grid.v
        n1 = float(np.sum(w))
        c = float(np.dot(v**2, w)) / n1
        if c <= 0:
            raise DomainError("nonpositive basis constant; weight or grid invalid")
        n2 = float(np.dot(v**2, w))
        n3 = float(np.dot((v**2 - c) ** 2, w))
        return cls(grid=grid, c=c, norm1_sq=n1, norm2_sq=n2, norm3_sq=n3)

    def vectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.grid.v
        return np.ones_like(v), v, v**2 - self.c


@dataclass
class Moments1D:
    rho: np.ndarray
    J: np.ndarray
    kappa: np.ndarray

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a), initial=0.0)) for a in (self.rho, self.J, self.kappa))

    def __sub__(self, other: "Moments1D") -> "Moments1D":
        return Moments1D(self.rho - other.rho, self.J - other.J, self.kappa - other.kappa)


def moments(f: LowRankMatrix, grid: VelocityGrid) -> Moments1D:
    """Mass, current and kinetic-energy densities by factor-wise quadrature."""
    if f.Uv.shape[0] != grid.n:
        raise DimensionError("velocity factor length does not match grid")
    h, v = grid.h, grid.v
    m0 = h * f.Uv.sum(axis=0)                  # <Uv_l, 1>
    m1 = h * (f.Uv.T @ v)                      # <Uv_l, v>
    m2 = h * (f.Uv.T @ (0.5 * v**2))           # <Uv_l, v^2/2>
    return Moments1D(
        rho=f.Ux @ (f.C * m0),
        J=f.Ux @ (f.C * m1),
        kappa=f.Ux @ (f.C * m2),
    )


def lift_moments(m: Moments1D, basis: MomentBasis) -> LowRankMatrix:
    """Exact rank-3 carrier whose moments are m.

    Stored un-recompressed as exactly three terms so that conservation is
    enforced structurally even when terms degenerate.
    """
    wp = basis.grid.w_points
    v = basis.grid.v
    ux = np.column_stack([
        m.rho / basis.norm1_sq,
        m.J / basis.norm2_sq,
        (2.0 * m.kappa - basis.c * m.rho) / basis.norm3_sq,
    ])
    uv = np.column_stack([wp, wp * v, wp * (v**2 - basis.c)])
    return LowRankMatrix(np.ones(3), ux, uv, canonical=False)


def moment_split(f: LowRankMatrix, basis: MomentBasis) -> tuple[LowRankMatrix, LowRankMatrix]:
    """Decompose f into the moment carrier and the zero-moment remainder."""
    carrier = lift_moments(moments(f, basis.grid), basis)
    remainder = recompress(add(f, scale(carrier, -1.0)))
    return carrier, remainder


def _truncate_remainder(remainder: LowRankMatrix, basis: MomentBasis, eps: float,
                        moment_scale: float) -> LowRankMatrix:
    out = truncate_weighted(remainder, basis.grid.w_points, eps)
    leak = moments(out, basis.grid)
    if leak.max_abs() > _MOMENT_LEAK_TOL * (1.0 + moment_scale):
        out = add(out, scale(lift_moments(leak, basis), -1.0))
    return out


def truncate_conservative(f: LowRankMatrix, basis: MomentBasis, eps: float) -> LowRankMatrix:
    """Truncate the remainder only; the moments of f are preserved exactly."""
    m = moments(f, basis.grid)
    carrier = lift_moments(m, basis)
    remainder = recompress(add(f, scale(carrier, -1.0)))
    return add(carrier, _truncate_remainder(remainder, basis, eps, m.max_abs()))


def truncate_to_moments(f: LowRankMatrix, m_target: Moments1D, basis: MomentBasis,
                        eps: float) -> LowRankMatrix:
    """Like truncate_conservative but pins the moments to external values.

    The remainder still comes from f's own moments; only the carrier is
    rebuilt from ``m_target``, so the result's moments equal ``m_target``.
    """
    own = moments(f, basis.grid)
    remainder = recompress(add(f, scale(lift_moments(own, basis), -1.0)))
    carrier = lift_moments(m_target, basis)
    return add(carrier, _truncate_remainder(remainder, basis, eps, m_target.max_abs()))
