"""Measurement model for BB84 with constant detection-efficiency mismatch.

Bob's three-dimensional space is spanned by |0>, |1>, |vac>. Bipartite
operators use the basis ordering AB = 00, 01, 10, 11 for the photon block,
with the two vacuum components (0,vac), (1,vac) appended last, so a 6x6
state has its 4x4 photon block in the top-left corner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError
from .linalg import require_hermitian

PHOTON_DIM = 4
FULL_DIM = 6

# Bob's bit value carried by each photon-block basis vector (AB = 00, 01, 10, 11).
BOB_BITS = np.array([0, 1, 0, 1])
# Alice's bit value for the same ordering.
ALICE_BITS = np.array([0, 0, 1, 1])

_KET0 = np.array([1.0, 0.0])
_KET1 = np.array([0.0, 1.0])
_KET_PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)
_KET_MINUS = np.array([1.0, -1.0]) / np.sqrt(2.0)


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class MismatchScenario:
    """Detector efficiencies and basis-choice probability.

    ``eta`` is the normalized mismatch min(eta0, eta1) / max(eta0, eta1).
    """

    eta0: float
    eta1: float
    p_z: float = 1.0

    def __post_init__(self):
        for name in ("eta0", "eta1"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} = {v} outside (0, 1]")
        if not 0.0 <= self.p_z <= 1.0:
            raise ValueError(f"p_z = {self.p_z} outside [0, 1]")

    @property
    def eta(self) -> float:
        return min(self.eta0, self.eta1) / max(self.eta0, self.eta1)

    @property
    def p_x(self) -> float:
        return 1.0 - self.p_z


@dataclass(frozen=True)
class ObservedRates:
    """Channel statistics entering the constraint equations.

    t: transparency (trace of the photon block), q_x: x-basis error
    statistic, q_z: key-basis QBER, p_pass: sifting pass probability.
    """

    t: float
    q_x: float
    q_z: float
    p_pass: float

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ValueError(f"t = {self.t} outside (0, 1]")
        if not 0.0 < self.p_pass <= 1.0:
            raise ValueError(f"p_pass = {self.p_pass} outside (0, 1]")
        for name in ("q_x", "q_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")


@dataclass(frozen=True)
class GammaSet:
    """The three 4x4 constraint operators on the photon block.

    gamma1 fixes the weighted mean detection rate, gamma2 the weighted
    x-basis error rate, gamma3 the sifted-key rate.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        return [self.gamma1, self.gamma2, self.gamma3]


def build_bob_povm(scenario: MismatchScenario) -> list[np.ndarray]:
    """Bob's five POVM elements [P_z0, P_z1, P_x0, P_x1, P_noclick] on C^3.

    The mismatched detector (bit 1) fires with relative probability eta;
    the no-click element completes the set to the identity.
    """
    eta = scenario.eta
    p_z, p_x = scenario.p_z, scenario.p_x
    elements2 = [
        p_z * _proj(_KET0),
        p_z * eta * _proj(_KET1),
        p_x * _proj(_KET_PLUS),
        p_x * eta * _proj(_KET_MINUS),
    ]
    povm = []
    for e2 in elements2:
        e3 = np.zeros((3, 3), dtype=complex)
        e3[:2, :2] = e2
        povm.append(e3)
    p_empty = np.eye(3, dtype=complex) - sum(povm)
    povm.append(p_empty)
    return povm


def build_gamma_set(eta: float) -> GammaSet:
    """Constraint operators for mismatch eta, in the AB = 00,01,10,11 ordering."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta = {eta} outside (0, 1]")
    gamma1 = eta * np.eye(4)
    gamma2 = (eta / 2.0) * np.array(
        [
            [1.0, 0.0, 0.0, -1.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, -1.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0, 1.0],
        ]
    )
    gamma3 = np.diag([1.0, eta, 1.0, eta])
    return GammaSet(gamma1=gamma1, gamma2=gamma2, gamma3=gamma3)


def constraint_values(obs: ObservedRates, eta: float) -> tuple[float, float, float]:
    """Right-hand sides (t*eta, t*eta*q_x, p_pass) of the three constraints."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta = {eta} outside (0, 1]")
    return (obs.t * eta, obs.t * eta * obs.q_x, obs.p_pass)


def photon_block(rho: np.ndarray) -> np.ndarray:
    """The 4x4 single-photon block of a 6x6 state (identity on 4x4 input)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape == (PHOTON_DIM, PHOTON_DIM):
        return rho
    if rho.shape == (FULL_DIM, FULL_DIM):
        return rho[:PHOTON_DIM, :PHOTON_DIM]
    raise ValueError(f"expected a 4x4 or 6x6 state, got shape {rho.shape}")


def gamma_expectations(rho: np.ndarray, gammas: GammaSet) -> np.ndarray:
    """Expectation values Tr(Gamma_i rho) on the photon block, as a length-3 array."""
    block = photon_block(require_hermitian(rho))
    return np.array(
        [float(np.real(np.trace(g @ block))) for g in gammas.as_list()]
    )


def _embed(block4: np.ndarray, t: float) -> np.ndarray:
    """Embed a photon block into 6 dims with the canonical vacuum part (1-t)*I_2/2."""
    rho = np.zeros((FULL_DIM, FULL_DIM), dtype=complex)
    rho[:PHOTON_DIM, :PHOTON_DIM] = block4
    rho[4, 4] = (1.0 - t) / 2.0
    rho[5, 5] = (1.0 - t) / 2.0
    return rho


def depolarizing_state(q: float, t: float) -> np.ndarray:
    """Reference state of a depolarizing channel with QBER q and transparency t.

    The photon block is t times the Bell state sent through a depolarizing
    channel on Bob's qubit; the vacuum block is (1-t)*I_2/2. Unit trace.
    """
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q = {q} outside [0, 1/2]")
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t = {t} outside (0, 1]")
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    block = (1.0 - 2.0 * q) * bell + 2.0 * q * np.eye(4) / 4.0
    return _embed(t * block, t)


def attack_block(q_z: float, q_x: float, delta: float, t: float = 1.0) -> np.ndarray:
    """Photon block of the extremal attack state, without feasibility checks.

    Two 2x2 blocks on the (00,11) and (01,10) index pairs; not positive
    semidefinite when (1 - 2*q_x)^2 > 1 - delta^2.
    """
    outer = (1.0 - q_z) / 2.0 * np.array(
        [[1.0 + delta, 1.0 - 2.0 * q_x], [1.0 - 2.0 * q_x, 1.0 - delta]]
    )
    inner = q_z / 2.0 * np.array(
        [[1.0 - delta, 1.0 - 2.0 * q_x], [1.0 - 2.0 * q_x, 1.0 + delta]]
    )
    block = np.zeros((4, 4))
    block[np.ix_([0, 3], [0, 3])] = outer
    block[np.ix_([1, 2], [1, 2])] = inner
    return t * block


def optimal_attack_state(
    q_z: float,
    q_x: float,
    delta: float,
    t: float = 1.0,
    check_feasibility: bool = True,
) -> np.ndarray:
    """The 6x6 state achieving the key-rate minimum for the given observations.

    Raises:
        ValueError: if delta lies outside [-1, 1] or another argument is out
            of range.
        FeasibilityError: if (q_x, delta) violate the existence condition
            2*q_x >= 1 - sqrt(1 - delta^2) (no PSD state matches the
            observations). Pass ``check_feasibility=False`` to build the
            indefinite matrix anyway, e.g. for boundary scans.
    """
    if not -1.0 <= delta <= 1.0:
        raise ValueError(f"delta = {delta} outside [-1, 1]")
    if not 0.0 <= q_z <= 1.0 or not 0.0 <= q_x <= 1.0:
        raise ValueError("q_z and q_x must lie in [0, 1]")
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t = {t} outside (0, 1]")
    if check_feasibility and (1.0 - 2.0 * q_x) ** 2 > 1.0 - delta**2 + 1e-15:
        raise FeasibilityError(
            f"no PSD state exists for q_x = {q_x}, delta = {delta}: "
            "2*q_x >= 1 - sqrt(1 - delta^2) is violated"
        )
    return _embed(attack_block(q_z, q_x, delta, t), t)
