"""Means-tested pension, fund fees, inflation deflator, wealth transition.

Every threshold and payment indexes with the compound deflator Q (base year
Q = 1), so the whole block is homogeneous of degree one in (W, Q): real
outcomes depend only on real wealth W/Q.

The pension and transition formulas are written against the dispatching
helpers in `autodiff`, so the identical code serves plain numpy evaluation
and differentiable training; keep raw `np.maximum` etc. out of this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericError

__all__ = [
    "PensionParams",
    "AccountParams",
    "AccountState",
    "compound_deflator",
    "deflator_path",
    "age_pension",
    "asset_test_cutoff",
    "fees",
    "wealth_step",
    "transition_balance",
]


@dataclass(frozen=True)
class PensionParams:
    """June-2020 single homeowner rates; thresholds in base-year dollars.

    tau_a is the statutory per-fortnight asset taper; it applies
    fortnights-per-year times per year of excess assets.
    """

    a_max: float = 24_619.0          # full annual pension
    w_a: float = 263_250.0           # asset-test free area
    tau_a: float = 0.003             # taper per fortnight per $ excess
    income_free: float = 4_536.0     # income-test free area, $/yr
    w_i: float = 51_800.0            # lower deeming threshold
    r1: float = 0.0025               # deeming rate below w_i
    r2: float = 0.0225               # deeming rate above w_i
    tau_i: float = 0.5               # income-test taper
    fortnights_per_year: int = 26

    def __post_init__(self):
        if not self.r1 < self.r2:
            raise ConfigError("deeming rates must satisfy r1 < r2")
        if min(self.a_max, self.w_a, self.tau_a, self.income_free, self.w_i,
               self.r1, self.tau_i) < 0 or self.a_max == 0:
            raise ConfigError("pension rates must be non-negative, a_max > 0")


@dataclass(frozen=True)
class AccountParams:
    omega: float = 0.7               # growth-assets weight
    admin_fee: float = 50.0          # $/yr in base-year dollars
    indirect_cost_ratio: float = 0.006
    investment_fee: float = 0.005

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError("omega must lie in [0, 1]")
        if min(self.admin_fee, self.indirect_cost_ratio,
               self.investment_fee) < 0:
            raise ConfigError("fees must be non-negative")

    @property
    def fee_rate(self) -> float:
        return self.indirect_cost_ratio + self.investment_fee


@dataclass(frozen=True)
class AccountState:
    W: float    # nominal wealth
    Q: float    # compound deflator
    t: int      # years since retirement


def compound_deflator(q_path, t: int) -> float:
    """Q_t = exp(sum of inflation over years 1..t); Q_0 = 1.

    q_path[s] is the inflation over year s-1 -> s, so entry 0 is unused.
    """
    if t < 0:
        raise ConfigError("t must be >= 0")
    if t == 0:
        return 1.0
    q = np.asarray(q_path, dtype=float)
    return float(np.exp(q[1:t + 1].sum()))


def deflator_path(q: np.ndarray) -> np.ndarray:
    """Vectorized compound_deflator along axis -1 (paths x years)."""
    q = np.asarray(q, dtype=float)
    out = np.ones_like(q)
    out[..., 1:] = np.exp(np.cumsum(q[..., 1:], axis=-1))
    return out


def _check_wealth(W) -> None:
    if isinstance(W, Tensor):
        return  # training-side wealth is clamped non-negative by construction
    if np.any(np.asarray(W) < 0):
        raise ConfigError("wealth must be non-negative")


def age_pension(W, Q, params: PensionParams = PensionParams()):
    """Annual pension payment: the lesser of the asset- and income-test amounts.

    Accepts scalars, arrays, or Tensors for W (and Q).
    """
    _check_wealth(W)
    p = params
    full = p.a_max * Q
    # Asset test: taper on wealth above the free area.
    excess_assets = ad.maximum(W - p.w_a * Q, 0.0)
    a_asset = ad.maximum(full - p.tau_a * p.fortnights_per_year * excess_assets,
                         0.0)
    # Income test: deemed income from financial assets, two-tier rates.
    deemed = p.r1 * ad.minimum(W, p.w_i * Q) \
        + p.r2 * ad.maximum(W - p.w_i * Q, 0.0)
    a_income = ad.maximum(
        full - p.tau_i * ad.maximum(deemed - p.income_free * Q, 0.0), 0.0)
    return ad.minimum(a_asset, a_income)


def asset_test_cutoff(params: PensionParams = PensionParams()) -> float:
    """Base-year wealth at which the asset test extinguishes the pension."""
    p = params
    return p.w_a + p.a_max / (p.fortnights_per_year * p.tau_a)


def fees(W, Q, params: AccountParams = AccountParams()):
    """Annual fund fee: indexed admin charge plus an asset-based rate."""
    return params.admin_fee * Q + params.fee_rate * W


def transition_balance(W, A, C, fee, R):
    """Next-year wealth: max(W + A - C - fee, 0) * e^R.

    Shared by every rollout (learned policy, deterministic strategies, and
    oracles); accepts scalars, arrays, or Tensors.
    """
    return ad.maximum(W + A - C - fee, 0.0) * ad.exp(R)


def wealth_step(state: AccountState, C: float, A: float, R: float,
                fee: float) -> AccountState:
    """One-year account update; validates the consumption constraint."""
    if not (0.0 <= C <= state.W + A):
        raise ConfigError(
            f"consumption {C} outside [0, {state.W + A}] at t={state.t}")
    W_next = transition_balance(state.W, A, C, fee, R)
    if not np.isfinite(W_next):
        raise NumericError(f"non-finite wealth after step t={state.t}")
    return AccountState(W=float(W_next), Q=state.Q, t=state.t + 1)
