"""Seven-factor economic scenario generator.

Annual log-return dynamics for inflation (q), the real component of the
nominal short rate (S, with s = S + q), domestic equity (e), international
equity (n), domestic bonds (b), international bonds (o) and house prices (h).
Inflation, S and domestic equity are AR(1); the remaining factors cascade off
freshly computed values within the year, in the fixed order
q -> S -> e -> n -> b -> o -> h.

The module covers three jobs: stepping/simulating the model with one
counter-based random stream per path, refitting the coefficients from an
annual historical index table by per-equation OLS, and residual diagnostics
for the fit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericError

_DATA_DIR = Path(__file__).resolve().parent / "data"

__all__ = [
    "EsgParams",
    "EconState",
    "ShockVector",
    "HistoricalSeries",
    "ScenarioPanel",
    "DEFAULT_PARAMS",
    "bundled_history_path",
    "stationary_state",
    "step_esg",
    "simulate",
    "portfolio_return",
    "calibrate",
    "residual_diagnostics",
    "load_history",
    "log_return_table",
    "initial_state_from_history",
    "save_params",
    "load_params",
    "panel_to_csv",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EsgParams:
    """Model coefficients; sigma_* are residual standard deviations."""

    mu_q: float
    phi_q: float
    sigma_q: float
    mu_S: float
    phi_S: float
    sigma_S: float
    mu_e: float
    phi_e: float
    sigma_e: float
    psi_n0: float
    psi_n1: float
    psi_n2: float
    sigma_n: float
    psi_b0: float
    psi_b1: float
    psi_b2: float
    sigma_b: float
    psi_o0: float
    psi_o1: float
    psi_o2: float
    sigma_o: float
    psi_h0: float
    psi_h1: float
    psi_h2: float
    sigma_h: float

    def __post_init__(self):
        for name in ("sigma_q", "sigma_S", "sigma_e", "sigma_n",
                     "sigma_b", "sigma_o", "sigma_h"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("phi_q", "phi_S", "phi_e"):
            if not abs(getattr(self, name)) < 1:
                raise ConfigError(f"|{name}| must be < 1 for stationarity")


# Default coefficient set, fitted on the bundled 1992-2020 Australian annual
# series. Kept verbatim as the reference preset even though a re-fit via
# `calibrate` reproduces only some rows exactly (see tests); do not edit in
# place, use dataclasses.replace for variants.
DEFAULT_PARAMS = EsgParams(
    mu_q=0.024, phi_q=0.1346, sigma_q=0.012,
    mu_S=0.141, phi_S=0.813, sigma_S=0.015,
    mu_e=0.085, phi_e=0.164, sigma_e=0.119,
    psi_n0=-0.018, psi_n1=0.104, psi_n2=0.911, sigma_n=0.090,
    psi_b0=0.073, psi_b1=-0.103, psi_b2=-0.050, sigma_b=0.036,
    psi_o0=-0.026, psi_o1=1.340, psi_o2=-0.200, sigma_o=0.081,
    psi_h0=0.066, psi_h1=-0.489, psi_h2=1.037, sigma_h=0.061,
)


@dataclass(frozen=True)
class EconState:
    """One year's factor values. s (nominal short rate) is derived: s = S + q."""

    q: float
    S: float
    e: float
    n: float
    b: float
    o: float
    h: float

    @property
    def s(self) -> float:
        return self.S + self.q

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.S, self.e, self.n, self.b, self.o, self.h])


@dataclass(frozen=True)
class ShockVector:
    """Already-scaled residuals (sigma times a standard-normal draw)."""

    eps_q: float = 0.0
    eps_S: float = 0.0
    eps_e: float = 0.0
    eps_n: float = 0.0
    eps_b: float = 0.0
    eps_o: float = 0.0
    eps_h: float = 0.0


@dataclass(frozen=True)
class HistoricalSeries:
    """Annual index levels; the short rate s is a rate, not an index."""

    year: np.ndarray
    cpi: np.ndarray
    s: np.ndarray
    E: np.ndarray
    N: np.ndarray
    B: np.ndarray
    O: np.ndarray
    HPI: np.ndarray

    def __post_init__(self):
        n = len(self.year)
        for f in fields(self):
            if len(getattr(self, f.name)) != n:
                raise DataError("historical series columns differ in length")
        if np.any(np.diff(self.year) <= 0):
            raise DataError("years must be strictly increasing")
        for name in ("cpi", "E", "N", "B", "O", "HPI"):
            if np.any(getattr(self, name) <= 0):
                raise DataError(f"index column {name} must be positive")

    def __len__(self):
        return len(self.year)


@dataclass
class ScenarioPanel:
    """M simulated paths over t = 0..T.

    Column t = 0 holds the initial state; R[:, 0] = 0 (no realized prior-year
    return) and Q[:, 0] = 1. For t >= 1, R[:, t] is the portfolio return
    earned over year t-1 -> t and Q[:, t] = exp(sum of q over years 1..t).
    """

    M: int
    T: int
    q: np.ndarray
    s: np.ndarray
    e: np.ndarray
    n: np.ndarray
    b: np.ndarray
    o: np.ndarray
    h: np.ndarray
    R: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        want = (self.M, self.T + 1)
        for name in ("q", "s", "e", "n", "b", "o", "h", "R", "Q"):
            if getattr(self, name).shape != want:
                raise DataError(f"panel column {name} has shape "
                                f"{getattr(self, name).shape}, expected {want}")
        if np.any(self.Q[:, 0] != 1.0) or np.any(self.Q <= 0):
            raise DataError("deflator must start at 1 and stay positive")

    def take(self, idx) -> "ScenarioPanel":
        """Sub-panel restricted to the given path indices."""
        idx = np.asarray(idx)
        cols = {n: getattr(self, n)[idx] for n in
                ("q", "s", "e", "n", "b", "o", "h", "R", "Q")}
        return ScenarioPanel(M=len(idx), T=self.T, **cols)


def bundled_history_path() -> Path:
    """Location of the packaged 1992-2020 Australian annual series."""
    return _DATA_DIR / "au_history_1992_2020.csv"


# ----------------------------------------------------------------- dynamics


def stationary_state(params: EsgParams) -> EconState:
    """Zero-shock fixed point of the dynamics."""
    p = params
    q = p.mu_q
    S = p.mu_S - p.mu_q
    e = p.mu_e
    n = (p.psi_n0 + p.psi_n2 * e) / (1.0 - p.psi_n1)
    b = (p.psi_b0 + p.psi_b2 * n) / (1.0 - p.psi_b1)
    o = p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n
    h = p.psi_h0 + p.psi_h1 * q + p.psi_h2 * b
    return EconState(q=q, S=S, e=e, n=n, b=b, o=o, h=h)


def step_esg(params: EsgParams, prev: EconState, shocks: ShockVector) -> EconState:
    """Advance the model one year. Shocks are the scaled residuals."""
    vals = list(prev.as_array()) + [shocks.eps_q, shocks.eps_S, shocks.eps_e,
                                    shocks.eps_n, shocks.eps_b, shocks.eps_o,
                                    shocks.eps_h]
    if not all(math.isfinite(v) for v in vals):
        raise NumericError("non-finite state or shock")
    p = params
    q = (1.0 - p.phi_q) * p.mu_q + p.phi_q * prev.q + shocks.eps_q
    S = p.phi_S * prev.S + (1.0 - p.phi_S) * (p.mu_S - p.mu_q) + shocks.eps_S
    e = (1.0 - p.phi_e) * p.mu_e + p.phi_e * prev.e + shocks.eps_e
    n = p.psi_n0 + p.psi_n1 * prev.n + p.psi_n2 * e + shocks.eps_n
    b = p.psi_b0 + p.psi_b1 * prev.b + p.psi_b2 * n + shocks.eps_b
    o = p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n + shocks.eps_o
    h = p.psi_h0 + p.psi_h1 * q + p.psi_h2 * b + shocks.eps_h
    return EconState(q=q, S=S, e=e, n=n, b=b, o=o, h=h)


def portfolio_return(state: EconState, omega: float) -> float:
    """Balanced-portfolio return: omega in growth, 1-omega in defensive."""
    if not 0.0 <= omega <= 1.0:
        raise ConfigError("omega must lie in [0, 1]")
    growth = 0.5 * state.e + 0.3 * state.n + 0.2 * state.h
    defensive = 0.3 * state.s + 0.5 * state.b + 0.2 * state.o
    return omega * growth + (1.0 - omega) * defensive


def _path_shocks(params: EsgParams, seed: int, m: int, T: int) -> np.ndarray:
    # One counter-based stream per path, keyed by (seed, path index), so the
    # panel is identical no matter how paths are batched or ordered.
    bits = np.random.Philox(key=np.array([seed & _MASK64, m], dtype=np.uint64))
    z = np.random.Generator(bits).standard_normal((T, 7))
    sig = np.array([params.sigma_q, params.sigma_S, params.sigma_e,
                    params.sigma_n, params.sigma_b, params.sigma_o,
                    params.sigma_h])
    return z * sig


def simulate(params: EsgParams, initial: EconState, M: int, T: int, seed: int,
             omega: float = 0.7, max_cells: int = 200_000_000) -> ScenarioPanel:
    """Simulate M paths over T years from the given initial state."""
    if M < 1 or T < 1:
        raise ConfigError("M and T must be at least 1")
    if M * (T + 1) * 9 > max_cells:
        raise ConfigError(f"panel of {M}x{T + 1} exceeds the cell budget "
                          f"({max_cells}); raise max_cells to override")
    eps = np.empty((M, T, 7))
    for m in range(M):
        eps[m] = _path_shocks(params, seed, m, T)

    p = params
    cols = {name: np.empty((M, T + 1)) for name in
            ("q", "S", "e", "n", "b", "o", "h")}
    for name in cols:
        cols[name][:, 0] = getattr(initial, name)
    for t in range(1, T + 1):
        ez = eps[:, t - 1, :]
        q = (1.0 - p.phi_q) * p.mu_q + p.phi_q * cols["q"][:, t - 1] + ez[:, 0]
        S = p.phi_S * cols["S"][:, t - 1] + (1.0 - p.phi_S) * (p.mu_S - p.mu_q) + ez[:, 1]
        e = (1.0 - p.phi_e) * p.mu_e + p.phi_e * cols["e"][:, t - 1] + ez[:, 2]
        n = p.psi_n0 + p.psi_n1 * cols["n"][:, t - 1] + p.psi_n2 * e + ez[:, 3]
        b = p.psi_b0 + p.psi_b1 * cols["b"][:, t - 1] + p.psi_b2 * n + ez[:, 4]
        o = p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n + ez[:, 5]
        h = p.psi_h0 + p.psi_h1 * q + p.psi_h2 * b + ez[:, 6]
        for name, col in zip(("q", "S", "e", "n", "b", "o", "h"),
                             (q, S, e, n, b, o, h)):
            cols[name][:, t] = col

    s = cols["S"] + cols["q"]
    growth = 0.5 * cols["e"] + 0.3 * cols["n"] + 0.2 * cols["h"]
    defensive = 0.3 * s + 0.5 * cols["b"] + 0.2 * cols["o"]
    R = omega * growth + (1.0 - omega) * defensive
    R[:, 0] = 0.0
    Q = np.ones((M, T + 1))
    Q[:, 1:] = np.exp(np.cumsum(cols["q"][:, 1:], axis=1))
    if not np.all(np.isfinite(R)):
        raise NumericError("non-finite values in simulated panel")
    return ScenarioPanel(M=M, T=T, q=cols["q"], s=s, e=cols["e"], n=cols["n"],
                         b=cols["b"], o=cols["o"], h=cols["h"], R=R, Q=Q)


# -------------------------------------------------------------- calibration


def load_history(path) -> HistoricalSeries:
    """Read the annual history CSV (header year,cpi,s,E,N,B,O,HPI)."""
    want = ["year", "cpi", "s", "E", "N", "B", "O", "HPI"]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [c.strip() for c in header] != want:
            missing = set(want) - {c.strip() for c in header}
            raise DataError(f"{path}: bad header, missing column(s) "
                            f"{sorted(missing) or header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(want):
                raise DataError(f"{path}:{lineno}: expected {len(want)} "
                                f"fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows)
    return HistoricalSeries(year=arr[:, 0].astype(int), cpi=arr[:, 1],
                            s=arr[:, 2], E=arr[:, 3], N=arr[:, 4],
                            B=arr[:, 5], O=arr[:, 6], HPI=arr[:, 7])


def log_return_table(history: HistoricalSeries) -> dict:
    """Annual log-returns of the index columns, with s and S aligned.

    Keys q,e,n,b,o,h are log(X_t / X_{t-1}) for the second year onward; s is
    the short-rate level over the same years and S = s - q.
    """
    lr = lambda x: np.log(x[1:] / x[:-1])
    q = lr(history.cpi)
    s = history.s[1:]
    return {
        "year": history.year[1:],
        "q": q, "s": s, "S": s - q,
        "e": lr(history.E), "n": lr(history.N), "b": lr(history.B),
        "o": lr(history.O), "h": lr(history.HPI),
    }


def _ols(y: np.ndarray, regressors: list, equation: str):
    """Intercept-plus-slopes OLS. Returns (coef, residuals, sigma).

    sigma is the residual standard error with ddof equal to the number of
    fitted parameters.
    """
    X = np.column_stack([np.ones(len(y))] + regressors)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DataError(f"singular design matrix in equation '{equation}'")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    sigma = float(np.sqrt(np.sum(resid ** 2) / dof))
    return coef, resid, sigma


def calibrate(history: HistoricalSeries) -> EsgParams:
    """Refit all seven equations from the history by per-equation OLS.

    Regressions follow the model's own right-hand sides (contemporaneous
    cascade regressors, AR(1) in q, S and e). Residual sigmas are floored at
    a tiny positive value so a noiseless synthetic history still yields a
    valid parameter set.
    """
    if len(history) < 10:
        raise DataError("need at least 10 annual records to calibrate")
    tab = log_return_table(history)
    q, S, e, n, b, o, h = (tab[k] for k in ("q", "S", "e", "n", "b", "o", "h"))

    floor = 1e-12
    cq, _, sq = _ols(q[1:], [q[:-1]], "q")
    mu_q = cq[0] / (1.0 - cq[1])
    cS, _, sS = _ols(S[1:], [S[:-1]], "S")
    mu_S = cS[0] / (1.0 - cS[1]) + mu_q
    ce, _, se = _ols(e[1:], [e[:-1]], "e")
    mu_e = ce[0] / (1.0 - ce[1])
    cn, _, sn = _ols(n[1:], [n[:-1], e[1:]], "n")
    cb, _, sb = _ols(b[1:], [b[:-1], n[1:]], "b")
    co, _, so = _ols(o, [e, n], "o")
    ch, _, sh = _ols(h, [q, b], "h")
    return EsgParams(
        mu_q=mu_q, phi_q=cq[1], sigma_q=max(sq, floor),
        mu_S=mu_S, phi_S=cS[1], sigma_S=max(sS, floor),
        mu_e=mu_e, phi_e=ce[1], sigma_e=max(se, floor),
        psi_n0=cn[0], psi_n1=cn[1], psi_n2=cn[2], sigma_n=max(sn, floor),
        psi_b0=cb[0], psi_b1=cb[1], psi_b2=cb[2], sigma_b=max(sb, floor),
        psi_o0=co[0], psi_o1=co[1], psi_o2=co[2], sigma_o=max(so, floor),
        psi_h0=ch[0], psi_h1=ch[1], psi_h2=ch[2], sigma_h=max(sh, floor),
    )


def residual_diagnostics(history: HistoricalSeries, params: EsgParams):
    """Residual series per equation and their cross-correlation matrix.

    Residuals are taken over the common sample (third record onward, where
    every lagged regressor exists). Returns (corr 7x7, residuals dict) with
    factor order q, S, e, n, b, o, h.
    """
    tab = log_return_table(history)
    q, S, e, n, b, o, h = (tab[k] for k in ("q", "S", "e", "n", "b", "o", "h"))
    p = params
    res = {
        "q": q[1:] - ((1 - p.phi_q) * p.mu_q + p.phi_q * q[:-1]),
        "S": S[1:] - (p.phi_S * S[:-1] + (1 - p.phi_S) * (p.mu_S - p.mu_q)),
        "e": e[1:] - ((1 - p.phi_e) * p.mu_e + p.phi_e * e[:-1]),
        "n": n[1:] - (p.psi_n0 + p.psi_n1 * n[:-1] + p.psi_n2 * e[1:]),
        "b": b[1:] - (p.psi_b0 + p.psi_b1 * b[:-1] + p.psi_b2 * n[1:]),
        "o": (o - (p.psi_o0 + p.psi_o1 * e + p.psi_o2 * n))[1:],
        "h": (h - (p.psi_h0 + p.psi_h1 * q + p.psi_h2 * b))[1:],
    }
    mat = np.corrcoef(np.vstack([res[k] for k in ("q", "S", "e", "n", "b", "o", "h")]))
    return mat, res


def initial_state_from_history(history: HistoricalSeries) -> EconState:
    """Starting state for simulations: factor values over the last data year."""
    tab = log_return_table(history)
    return EconState(q=tab["q"][-1], S=tab["S"][-1], e=tab["e"][-1],
                     n=tab["n"][-1], b=tab["b"][-1], o=tab["o"][-1],
                     h=tab["h"][-1])


# ------------------------------------------------------------- serialization


def save_params(params: EsgParams, path) -> None:
    """Write coefficients as flat `name = value` lines."""
    with open(path, "w") as fh:
        for f in fields(params):
            fh.write(f"{f.name} = {float(getattr(params, f.name))!r}\n")


def load_params(path) -> EsgParams:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'name = value'")
            name, _, raw = line.partition("=")
            try:
                values[name.strip()] = float(raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad number {raw!r}") from None
    want = {f.name for f in fields(EsgParams)}
    missing = want - values.keys()
    if missing:
        raise DataError(f"{path}: missing parameter(s) {sorted(missing)}")
    extra = values.keys() - want
    if extra:
        raise DataError(f"{path}: unknown parameter(s) {sorted(extra)}")
    return EsgParams(**values)


def panel_to_csv(panel: ScenarioPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t", "q", "s", "e", "n", "b", "o", "h", "R", "Q"])
        for m in range(panel.M):
            for t in range(panel.T + 1):
                w.writerow([m, t] + [f"{getattr(panel, c)[m, t]:.10g}"
                                     for c in ("q", "s", "e", "n", "b", "o", "h", "R", "Q")])


def vary(params: EsgParams, **changes) -> EsgParams:
    """Convenience wrapper over dataclasses.replace."""
    return replace(params, **changes)
