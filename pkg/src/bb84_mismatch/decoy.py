"""Decoy-state estimation for weak-coherent-pulse sources.

Per-basis, per-outcome gain bookkeeping for one signal and two decoy
intensities, single-photon yield and error bounds, the worst-case key rate
over the estimated box, and the fiber-channel model used to simulate the
observations. Detector-efficiency mismatch makes the statistics
outcome-dependent, so every quantity is tracked separately for Bob's
outcomes 0 and 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TruncationError
from .keyrates import KeyRateResult
from .linalg import binary_entropy

INTENSITIES = ("s", "d1", "d2")
BASES = ("z", "x")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DecoyConfig:
    """Signal and decoy intensities plus the photon-number cutoff.

    Requires 0 <= nu2 < nu1 and nu1 + nu2 < mu, the regime in which the
    single-photon bounds hold.
    """

    mu: float
    nu1: float
    nu2: float
    i_max: int = 25

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ConfigError(f"signal intensity mu = {self.mu} must be positive")
        if not 0.0 <= self.nu2 < self.nu1:
            raise ConfigError(f"decoy intensities must satisfy 0 <= nu2 < nu1, got {self.nu1}, {self.nu2}")
        if self.nu1 + self.nu2 >= self.mu:
            raise ConfigError(
                f"decoy intensities must satisfy nu1 + nu2 < mu, got {self.nu1} + {self.nu2} >= {self.mu}"
            )
        if self.i_max < 10:
            raise ConfigError(f"i_max = {self.i_max} below the minimum of 10")

    def intensity(self, v: str) -> float:
        return {"s": self.mu, "d1": self.nu1, "d2": self.nu2}[v]


@dataclass(frozen=True)
class DecoyObservations:
    """Gains Q^{v b beta} and error rates E^{v b beta}, shape (3, 2, 2).

    Axes: intensity (s, d1, d2), basis (z, x), Bob's outcome (0, 1).
    """

    gains: np.ndarray
    error_rates: np.ndarray

    def __post_init__(self):
        for name in ("gains", "error_rates"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (3, 2, 2):
                raise ValueError(f"{name} must have shape (3, 2, 2), got {arr.shape}")
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise ValueError(f"{name} entries must lie in [0, 1]")

    def gain(self, v: str, b: str, beta: int) -> float:
        return float(self.gains[INTENSITIES.index(v), BASES.index(b), beta])

    def error_rate(self, v: str, b: str, beta: int) -> float:
        return float(self.error_rates[INTENSITIES.index(v), BASES.index(b), beta])

    def error_gain(self, v: str, b: str, beta: int) -> float:
        """The product E^{v b beta} * Q^{v b beta}."""
        return self.error_rate(v, b, beta) * self.gain(v, b, beta)


@dataclass(frozen=True)
class ChannelModel:
    """Fiber link with lossy detectors, dark counts and a fixed optical error."""

    alpha_db_per_km: float
    length_km: float
    bob_loss_db: float
    e_det: float
    eta0: float
    eta1: float
    dark: tuple[float, float]

    def __post_init__(self):
        if self.length_km < 0.0 or self.bob_loss_db < 0.0 or self.alpha_db_per_km < 0.0:
            raise ValueError("losses and distance must be non-negative")
        for p in (self.e_det, self.eta0, self.eta1, *self.dark):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")

    @property
    def eta(self) -> float:
        return min(self.eta0, self.eta1) / max(self.eta0, self.eta1)

    def efficiency(self, beta: int) -> float:
        return (self.eta0, self.eta1)[beta]


def transmittance(model: ChannelModel) -> float:
    """Probability that a photon reaches Bob's detectors."""
    return 10.0 ** (-(model.alpha_db_per_km * model.length_km + model.bob_loss_db) / 10.0)


def simulate_yield(model: ChannelModel, i: int, b: str, beta: int) -> float:
    """Detection probability of an i-photon pulse on detector beta.

    dark + i * T * eta_beta / 2, clamped to 1; the linear-in-i form neglects
    multiple photons surviving the line, which is accurate for lossy links.
    Basis-independent in this model.
    """
    if i < 0:
        raise ValueError("photon number must be non-negative")
    if b not in BASES:
        raise ValueError(f"unknown basis {b!r}")
    y = model.dark[beta] + i * transmittance(model) * model.efficiency(beta) / 2.0
    return min(y, 1.0)


def _error_weighted_yield(model: ChannelModel, i: int, beta: int) -> float:
    """The product e_i * Y_i: dark counts are errors half the time."""
    return (
        model.dark[beta]
        + i * transmittance(model) * model.e_det * model.efficiency(beta)
    ) / 2.0


def simulate_error(model: ChannelModel, i: int, b: str, beta: int) -> float:
    """Error rate of an i-photon pulse on detector beta.

    (dark + i * T * e_det * eta_beta) / (2 * Y_i); equals 1/2 for pure dark
    counts and e_det for a dark-count-free link.
    """
    y = simulate_yield(model, i, b, beta)
    if y <= 0.0:
        raise ValueError(f"yield vanishes for i = {i}, beta = {beta}; error rate undefined")
    return _error_weighted_yield(model, i, beta) / y


def poisson_pmf(i: int, mu: float) -> float:
    """Poisson weight mu^i e^-mu / i!, with the mu = 0 case concentrated at i = 0."""
    if mu == 0.0:
        return 1.0 if i == 0 else 0.0
    return math.exp(i * math.log(mu) - mu - math.lgamma(i + 1))


def poisson_gain(yields, mu_v: float, i_max: int) -> float:
    """Gain sum_i Y_i * Poisson(i; mu_v) truncated at i_max.

    Raises:
        TruncationError: if the Poisson tail mass beyond i_max is >= 1e-12.
    """
    weights = np.array([poisson_pmf(i, mu_v) for i in range(i_max + 1)])
    tail = 1.0 - float(weights.sum())
    if tail >= 1e-12:
        raise TruncationError(
            f"Poisson tail mass {tail:.3e} beyond i_max = {i_max} exceeds 1e-12"
        )
    y = np.asarray(list(yields), dtype=float)[: i_max + 1]
    if y.size < i_max + 1:
        raise ValueError("need yields up to i_max")
    return float(np.dot(y, weights))


def simulate_observations(model: ChannelModel, cfg: DecoyConfig) -> DecoyObservations:
    """Observed gains and error rates for all intensities, bases and outcomes."""
    gains = np.zeros((3, 2, 2))
    errors = np.zeros((3, 2, 2))
    for vi, v in enumerate(INTENSITIES):
        mu_v = cfg.intensity(v)
        for bi, b in enumerate(BASES):
            for beta in (0, 1):
                ys = [simulate_yield(model, i, b, beta) for i in range(cfg.i_max + 1)]
                q = poisson_gain(ys, mu_v, cfg.i_max)
                eq = poisson_gain(
                    [_error_weighted_yield(model, i, beta) for i in range(cfg.i_max + 1)],
                    mu_v,
                    cfg.i_max,
                )
                gains[vi, bi, beta] = q
                errors[vi, bi, beta] = eq / q if q > 0.0 else 0.0
    return DecoyObservations(gains=gains, error_rates=errors)


def bound_Y0(obs: DecoyObservations, cfg: DecoyConfig, beta: int) -> float:
    """Lower bound on the vacuum yield from the two decoy gains in the z basis."""
    q1 = obs.gain("d1", "z", beta)
    q2 = obs.gain("d2", "z", beta)
    raw = (cfg.nu1 * q2 * math.exp(cfg.nu2) - cfg.nu2 * q1 * math.exp(cfg.nu1)) / (
        cfg.nu1 - cfg.nu2
    )
    return max(raw, 0.0)


def bound_Q1(obs: DecoyObservations, cfg: DecoyConfig, beta: int) -> tuple[float, float]:
    """Lower and upper bounds on the single-photon signal gain Q_1^{s z beta}.

    The upper bound is the full signal gain; the lower bound combines the
    decoy gains with the vacuum-yield bound and is clamped into [0, upper].
    """
    mu, nu1, nu2 = cfg.mu, cfg.nu1, cfg.nu2
    den = mu * nu1 - mu * nu2 - nu1**2 + nu2**2
    if den <= 0.0:
        raise ConfigError("degenerate decoy intensities: mu*nu1 - mu*nu2 - nu1^2 + nu2^2 <= 0")
    qs = obs.gain("s", "z", beta)
    qd1 = obs.gain("d1", "z", beta)
    qd2 = obs.gain("d2", "z", beta)
    y0 = bound_Y0(obs, cfg, beta)
    lower = (
        mu**2
        * math.exp(-mu)
        / den
        * (
            qd1 * math.exp(nu1)
            - qd2 * math.exp(nu2)
            - (nu1**2 - nu2**2) / mu**2 * (qs * math.exp(mu) - y0)
        )
    )
    upper = qs
    return (min(max(lower, 0.0), upper), upper)


def bound_e1q1(obs: DecoyObservations, cfg: DecoyConfig, beta: int) -> float:
    """Upper bound on the single-photon error-gain product e_1 * Q_1^{s x beta}."""
    nu1, nu2 = cfg.nu1, cfg.nu2
    raw = (
        obs.error_gain("d1", "x", beta) * math.exp(nu1)
        - obs.error_gain("d2", "x", beta) * math.exp(nu2)
    ) * cfg.mu * math.exp(-cfg.mu) / (nu1 - nu2)
    return max(raw, 0.0)


def gamma2_upper(obs: DecoyObservations, cfg: DecoyConfig, eta: float) -> float:
    """Upper bound q*eta on the weighted x-basis error-rate constraint value."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta = {eta} outside (0, 1]")
    nu1, nu2 = cfg.nu1, cfg.nu2
    q = (
        (obs.error_gain("d1", "x", 0) + obs.error_gain("d1", "x", 1) / eta)
        * math.exp(nu1)
        - (obs.error_gain("d2", "x", 0) + obs.error_gain("d2", "x", 1) / eta)
        * math.exp(nu2)
    ) * cfg.mu * math.exp(-cfg.mu) / (nu1 - nu2)
    return max(q, 0.0) * eta


def _singles_rate(
    q1_0: float, q1_1: float, q: float, eta: float, ec_term: float
) -> tuple[float, float] | None:
    """Key rate from single-photon gains (q1_0, q1_1) and error parameter q.

    Returns (rate, lambda_of_q), or None when the pair is infeasible (the
    phase-error argument would be negative). ``ec_term`` is the full
    error-correction leakage, already multiplied by its gain.
    """
    p_pass = q1_0 + q1_1
    if p_pass <= 0.0:
        return None
    t = q1_0 + q1_1 / eta

    def lam(x: float) -> float:
        r = math.sqrt((q1_0 - q1_1) ** 2 + eta * (t - 2.0 * x) ** 2)
        return 0.5 - r / (2.0 * p_pass)

    lam_q = lam(q)
    if lam_q < -1e-15:
        return None
    lam_q = max(lam_q, 0.0)
    rate = p_pass * (binary_entropy(lam(t / 2.0)) - binary_entropy(lam_q)) - ec_term
    return rate, lam_q


def _golden_min(fn, a: float, b: float, tol: float = 1e-10) -> float:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 > f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fn(x1)
    return (a + b) / 2.0


def _ec_term(obs: DecoyObservations, f_ec: float) -> float:
    q_total = obs.gain("s", "z", 0) + obs.gain("s", "z", 1)
    if q_total <= 0.0:
        return 0.0
    e_total = (obs.error_gain("s", "z", 0) + obs.error_gain("s", "z", 1)) / q_total
    return f_ec * q_total * binary_entropy(min(e_total, 1.0))


def decoy_keyrate(
    obs: DecoyObservations, cfg: DecoyConfig, eta: float, f_ec: float = 1.0
) -> KeyRateResult:
    """Worst-case key rate over the estimated single-photon box.

    The rate is minimized over Q_1^{s z beta} between the decoy lower bound
    and the trivial upper bound for each outcome, with the error parameter
    fixed at its upper bound (the rate decreases monotonically in it). A
    64x64 grid scan is refined by coordinate descent. The result records the
    argmin and whether it sits at the lower-bound corner.
    """
    lo0, up0 = bound_Q1(obs, cfg, 0)
    lo1, up1 = bound_Q1(obs, cfg, 1)
    q = gamma2_upper(obs, cfg, eta) / eta
    ec = _ec_term(obs, f_ec)

    def rate_at(a: float, b: float) -> float | None:
        out = _singles_rate(a, b, q, eta, ec)
        return None if out is None else out[0]

    def rate_or_inf(a: float, b: float) -> float:
        r = rate_at(a, b)
        return math.inf if r is None else r

    grid0 = np.linspace(lo0, up0, 64)
    grid1 = np.linspace(lo1, up1, 64)
    best, arg = None, None
    for a in grid0:
        for b in grid1:
            r = rate_at(float(a), float(b))
            if r is not None and (best is None or r < best):
                best, arg = r, (float(a), float(b))
    if best is None:
        return KeyRateResult(
            rate=None, feasible=False, delta=None, lam=None, method="decoy"
        )

    a, b = arg
    for _ in range(40):
        prev = best
        a = _golden_min(lambda x: rate_or_inf(x, b), lo0, up0)
        b = _golden_min(lambda y: rate_or_inf(a, y), lo1, up1)
        candidate = rate_at(a, b)
        if candidate is None or candidate > best:
            a, b = arg
            break
        best, arg = candidate, (a, b)
        if prev - best < 1e-12:
            break

    a, b = arg
    out = _singles_rate(a, b, q, eta, ec)
    rate, lam_q = out
    t = a + b / eta
    p_pass = a + b
    delta = (
        (2.0 * p_pass - t * (1.0 + eta)) / (t * (1.0 - eta)) if eta < 1.0 else 0.0
    )
    atol0 = 1e-7 * max(up0 - lo0, 1e-300)
    atol1 = 1e-7 * max(up1 - lo1, 1e-300)
    return KeyRateResult(
        rate=rate,
        feasible=True,
        delta=delta,
        lam=lam_q,
        method="decoy",
        argmin=(a, b),
        at_lower_corner=bool(abs(a - lo0) <= atol0 and abs(b - lo1) <= atol1),
    )


def theoretical_limit(
    model: ChannelModel, cfg: DecoyConfig, eta: float | None = None, f_ec: float = 1.0
) -> KeyRateResult:
    """Rate evaluated at the channel's actual single-photon values, no estimation.

    Uses the true single-photon gains and the true weighted error parameter
    from the simulation model; the gap to ``decoy_keyrate`` measures the
    estimation penalty.
    """
    if eta is None:
        eta = model.eta
    w1 = poisson_pmf(1, cfg.mu)
    q1 = [simulate_yield(model, 1, "z", beta) * w1 for beta in (0, 1)]
    e1 = [simulate_error(model, 1, "x", beta) for beta in (0, 1)]
    gamma2_actual = eta * e1[0] * q1[0] + e1[1] * q1[1]
    q_actual = gamma2_actual / eta
    obs = simulate_observations(model, cfg)
    ec = _ec_term(obs, f_ec)
    out = _singles_rate(q1[0], q1[1], q_actual, eta, ec)
    if out is None:
        return KeyRateResult(
            rate=None, feasible=False, delta=None, lam=None, method="theoretical_limit"
        )
    rate, lam_q = out
    t = q1[0] + q1[1] / eta
    p_pass = q1[0] + q1[1]
    delta = (
        (2.0 * p_pass - t * (1.0 + eta)) / (t * (1.0 - eta)) if eta < 1.0 else 0.0
    )
    return KeyRateResult(
        rate=rate,
        feasible=True,
        delta=delta,
        lam=lam_q,
        method="theoretical_limit",
        argmin=(q1[0], q1[1]),
    )
