"""Mean-field ODE for the collective variable and a fixed-step integrator.

The right-hand side is the sum over all transitions of the reduced
propensity times its state-change vector ``e_(n,k) - e_(m,k)``; each family
of random graphs contributes through its reduced propensities only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CnvmParams, Family, SbmFamily, propensity_table_reduced
from .sim import Trajectory


class StepSizeError(RuntimeError):
    """A share went clearly negative during integration: step too large."""


@dataclass(frozen=True)
class MfeSystem:
    """Mean-field system of dimension M*K.

    ``family=None`` (or an ER/regular family) selects the plain mixing form
    in which a node feels the global opinion shares; an SBM family reweights
    the mixing by block coupling.
    """

    params: CnvmParams
    family: Family = None

    def __post_init__(self):
        if isinstance(self.family, SbmFamily):
            if self.family.num_classes != self.params.k:
                raise ValueError("family block count does not match params K")
            if np.any(self.family.mean_block_prob() <= 0):
                raise ValueError("every block needs a positive mean edge "
                                 "probability")

    @property
    def dim(self) -> int:
        return self.params.m * self.params.k


def rhs(system: MfeSystem, c: np.ndarray) -> np.ndarray:
    """Time derivative of the collective vector at c.

    Components sum to zero for every c, because every state-change vector
    does.
    """
    alpha = propensity_table_reduced(c, system.params, system.family)
    outflow = alpha.sum(axis=2)   # (K, M) rate leaving (m, k)
    inflow = alpha.sum(axis=1)    # (K, M) rate entering (n, k)
    return (inflow - outflow).T.reshape(-1)


def integrate(system: MfeSystem, c0, t_grid: np.ndarray,
              h: float = 0.01) -> Trajectory:
    """Classical fourth-order fixed-step integration, recorded on t_grid.

    ``h`` must divide every grid spacing. Raises StepSizeError if any
    component drops below -1e-9 (no silent clamping).
    """
    c0 = np.asarray(c0, dtype=np.float64)
    if c0.shape != (system.dim,):
        raise ValueError("c0 length must be M*K")
    if np.any(c0 < 0) or abs(c0.sum() - 1.0) > 1e-9:
        raise ValueError("c0 must lie on the probability simplex")
    t_grid = np.ascontiguousarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    deltas = np.diff(t_grid)
    if np.any(deltas <= 0):
        raise ValueError("time grid must be strictly increasing")
    if h <= 0:
        raise ValueError("step size must be positive")

    values = np.empty((t_grid.size, system.dim))
    values[0] = c0
    c = c0.copy()
    for seg, delta in enumerate(deltas):
        steps = max(1, round(delta / h))
        if abs(steps * h - delta) > 1e-9 * max(1.0, delta):
            raise ValueError("h must divide the grid spacing")
        hh = delta / steps
        for _ in range(steps):
            k1 = rhs(system, c)
            k2 = rhs(system, c + 0.5 * hh * k1)
            k3 = rhs(system, c + 0.5 * hh * k2)
            k4 = rhs(system, c + hh * k3)
            c = c + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if c.min() < -1e-9:
                raise StepSizeError(
                    f"share {c.min():.3e} below -1e-9 at t~{t_grid[seg]:g}; "
                    "reduce the step size")
        values[seg + 1] = c
    return Trajectory(times=t_grid, values=values,
                      num_opinions=system.params.m,
                      num_classes=system.params.k)


def sirs_preset(r_si: float, rt_ir: float, rt_rs: float) -> MfeSystem:
    """Three-opinion epidemic cycle (susceptible, infectious, recovered).

    Infection is the only neighbor-driven transition (rate ``r_si`` scaled
    by the infectious neighbor fraction); recovery and loss of immunity are
    noise transitions with rates ``rt_ir`` and ``rt_rs``.
    """
    if r_si < 0 or rt_ir < 0 or rt_rs < 0:
        raise ValueError("rates must be nonnegative")
    r = np.zeros((3, 3))
    r[0, 1] = r_si
    rt = np.zeros((3, 3))
    rt[1, 2] = rt_ir
    rt[2, 0] = rt_rs
    return MfeSystem(CnvmParams(r, rt))
