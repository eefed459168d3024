"""CRRA consumption utility, bequest utility, and lifetime aggregation.

Utilities are computed on real (deflated) dollars divided by `wealth_unit`.
The default unit of 1.0 evaluates in raw dollars; training sets the unit to
the initial wealth instead. CRRA is homothetic, so the rescaling multiplies
the objective by a positive constant and leaves the optimal policy unchanged
while keeping gradients far from the underflow regime (at rho = 5, dollar
arguments give utilities near 1e-19 and gradients near 1e-24).

Arguments below the floor are clamped, not rejected: with rho > 1 a depleted
path would otherwise send the objective to -infinity. The tiny default floor
keeps such paths finite but catastrophically bad, which is the intended
ranking signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError
from .mortality import SurvivalCurve

__all__ = [
    "UtilityParams",
    "consumption_utility",
    "bequest_utility",
    "bequest_coefficient",
    "lifetime_utility",
]


@dataclass(frozen=True)
class UtilityParams:
    rho: float = 5.0              # relative risk aversion, != 1
    phi: float = 0.5              # bequest strength in [0, 1)
    floor_epsilon: float = 1e-10  # clamp for real dollars inside utilities
    wealth_unit: float = 1.0      # divide real dollars by this before u(.)

    def __post_init__(self):
        if not 0.0 <= self.phi < 1.0:
            raise ConfigError("phi must lie in [0, 1)")
        if self.rho < 0.0 or self.rho == 1.0:
            raise ConfigError("rho must be >= 0 and != 1")
        if self.floor_epsilon <= 0.0:
            raise ConfigError("floor_epsilon must be positive")
        if self.wealth_unit <= 0.0:
            raise ConfigError("wealth_unit must be positive")


def bequest_coefficient(params: UtilityParams) -> float:
    """(phi / (1 - phi)) ** rho; 0 at phi = 0, 1 at phi = 0.5."""
    if params.phi == 0.0:
        return 0.0
    return (params.phi / (1.0 - params.phi)) ** params.rho


def _crra(x, params: UtilityParams):
    scaled = ad.maximum(x, params.floor_epsilon) * (1.0 / params.wealth_unit)
    return scaled ** (1.0 - params.rho) * (1.0 / (1.0 - params.rho))


def consumption_utility(c, params: UtilityParams = UtilityParams()):
    """u(c) for real consumption; accepts scalars, arrays, or Tensors."""
    return _crra(c, params)


def bequest_utility(w, params: UtilityParams = UtilityParams()):
    """v(w) for real residual wealth; identically 0 when phi = 0."""
    coeff = bequest_coefficient(params)
    if coeff == 0.0:
        return np.zeros_like(np.asarray(w, dtype=float)) if not isinstance(
            w, ad.Tensor) else ad.Tensor(np.zeros_like(w.value))
    return coeff * _crra(w, params)


def lifetime_utility(c_path, w_path, curve: SurvivalCurve,
                     params: UtilityParams = UtilityParams()) -> float:
    """Mortality-weighted total utility of one realized path (real dollars).

    Sums tpx[t] * u(c_t) + dq[t] * v(w_t) over t = 0..T; the death weight at
    t = 0 is zero by construction of the curve.
    """
    c = np.asarray(c_path, dtype=float)
    w = np.asarray(w_path, dtype=float)
    if c.shape != w.shape or len(c) != len(curve.tpx):
        raise DataError(f"path lengths {c.shape}/{w.shape} do not match "
                        f"curve horizon {curve.horizon}")
    total = float(np.sum(curve.tpx * consumption_utility(c, params)))
    if params.phi > 0.0:
        total += float(np.sum(curve.dq * bequest_utility(w, params)))
    return total
