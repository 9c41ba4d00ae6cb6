"""Auxiliary functions phi_beta and phibar_beta, their maxima, and P2(beta)."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .errors import ConfigError
from .pressure import EntropyStatus, PressureFunction
from .transfer import SpectralData

logger = logging.getLogger(__name__)

# Maxima closer than this are one maximizer
CLUSTER_RADIUS = 1e-6

# Maxima within this of the best value are global
VALUE_TOLERANCE = 1e-9

# Smallest |eigenvalue| of the Hessian below which a maximum is degenerate
DEGENERACY_TOLERANCE = 1e-7

COINCIDENCE_TOLERANCE = 1e-6

HESSIAN_STEP = 1e-4
QUARTIC_STEP = 1e-2
NEWTON_STEPS = 8


@dataclass(frozen=True, eq=False)
class Maximum:
    z: np.ndarray
    value: float
    hessian: np.ndarray
    degenerate: bool
    residual: float
    flatness_order: int | None = 1
    flatness_coefficient: float | None = None

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "value": self.value,
            "hessian": self.hessian.tolist(),
            "degenerate": self.degenerate,
            "residual": self.residual,
            "flatness_order": self.flatness_order,
            "flatness_coefficient": self.flatness_coefficient,
        }


@dataclass(frozen=True, eq=False)
class MaximaSet:
    beta: float
    maxima: list[Maximum]
    P2: float
    search_box: float
    radial: bool = False
    note: str | None = None

    @property
    def degenerate(self) -> bool:
        return any(m.degenerate for m in self.maxima)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "P2": self.P2,
            "search_box": self.search_box,
            "radial": self.radial,
            "degenerate": self.degenerate,
            "note": self.note,
            "maxima": [m.to_dict() for m in self.maxima],
        }


@dataclass(frozen=True, eq=False)
class QuadraticPressure:
    P2: float
    maxima: MaximaSet
    coincidence_gap: float


@dataclass(frozen=True, eq=False)
class EquilibriumState:
    """DGM mu_{beta z . psi} attached to one maximizer z."""

    t: np.ndarray
    z: np.ndarray
    spectral: SpectralData = field(repr=False)
    expectation: np.ndarray
    residual: float
    note: str | None = None


def _check_beta(beta: float) -> None:
    if beta < 0 or not math.isfinite(beta):
        raise ConfigError(f"beta must be finite and non-negative, got {beta}")


def phi_beta(pf: PressureFunction, beta: float, t) -> float:
    """-(beta/2)|t|^2 + P(beta t)."""
    _check_beta(beta)
    t = pf.family.check_t(t)
    return -0.5 * beta * float(t @ t) + pf.value(beta * t)


def phi_beta_gradient(pf: PressureFunction, beta: float, t) -> np.ndarray:
    t = pf.family.check_t(t)
    return beta * (pf.gradient(beta * t) - t)


def phi_beta_values(pf: PressureFunction, beta: float, T) -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    return -0.5 * beta * np.sum(T * T, axis=1) + pf.pressure_values(beta * T)


def phi_beta_hessian(pf: PressureFunction, beta: float, z, h: float = HESSIAN_STEP) -> np.ndarray:
    """-beta I + beta^2 Hess P(beta z)."""
    z = pf.family.check_t(z)
    return -beta * np.eye(pf.q) + beta**2 * pf.hessian_pressure(beta * z, h)


def phibar_beta(pf: PressureFunction, beta: float, z, **entropy_kwargs) -> float:
    """H(z) + (beta/2)|z|^2; -inf outside the mean set."""
    _check_beta(beta)
    entropy = pf.entropy_legendre(z, **entropy_kwargs)
    if entropy.status is EntropyStatus.MINUS_INFINITY:
        return -math.inf
    z = entropy.z
    return entropy.H + 0.5 * beta * float(z @ z)


def _is_degenerate(hessian: np.ndarray) -> bool:
    return bool(np.min(np.abs(np.linalg.eigvalsh(hessian))) < DEGENERACY_TOLERANCE)


def _flatness(derivative, x: float, second: float) -> tuple[int | None, float | None]:
    """Order k and coefficient c of phi(x) - phi(x*) ~ -c |x - x*|^{2k}."""
    if abs(second) >= DEGENERACY_TOLERANCE:
        return 1, abs(second) / 2
    h = QUARTIC_STEP
    # Third derivative of phi' is the fourth derivative of phi
    fourth = (
        derivative(x + 2 * h) - 2 * derivative(x + h) + 2 * derivative(x - h) - derivative(x - 2 * h)
    ) / (2 * h**3)
    if fourth < -1e-6:
        return 2, -fourth / 24
    logger.warning(f"find_maxima: maximum at {x!r} is flatter than quartic; order not resolved")
    return None, None


def _sweep_roots(derivative, values: np.ndarray, xs: np.ndarray, mirrored_left: bool) -> list[float]:
    """Points where the derivative changes sign from + to -."""
    zero = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    signs = np.where(np.abs(values) <= zero, 0, np.sign(values)).astype(int)
    roots = []
    i = 0
    while i < len(xs):
        if signs[i] == 0:
            j = i
            while j + 1 < len(xs) and signs[j + 1] == 0:
                j += 1
            right = signs[j + 1] if j + 1 < len(xs) else 0
            if i > 0:
                left = signs[i - 1]
            else:
                left = -right if mirrored_left else 0
            if left > 0 and right < 0:
                roots.append(float(xs[(i + j) // 2]))
            i = j + 1
            continue
        if i + 1 < len(xs) and signs[i] > 0 and signs[i + 1] < 0:
            roots.append(optimize.brentq(derivative, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
        i += 1
    return roots


def _maxima_1d(pf, beta, K, grid_step, direction, radial) -> list[Maximum]:
    lo = 0.0 if radial else -K
    points = int(math.ceil((K - lo) / grid_step)) + 1
    if not radial and points % 2 == 0:
        points += 1
    xs = np.linspace(lo, K, points)
    grads = pf.pressure_gradients(beta * np.outer(xs, direction)) @ direction
    values = beta * (grads - xs)

    def derivative(x):
        return float(phi_beta_gradient(pf, beta, x * direction) @ direction)

    maxima = []
    for x in _sweep_roots(derivative, values, xs, mirrored_left=radial):
        z = x * direction
        hessian = np.atleast_2d(phi_beta_hessian(pf, beta, z))
        second = float(direction @ hessian @ direction)
        order, coefficient = _flatness(derivative, x, second)
        maxima.append(
            Maximum(
                z=z,
                value=phi_beta(pf, beta, z),
                hessian=hessian,
                degenerate=_is_degenerate(hessian),
                residual=float(np.linalg.norm(phi_beta_gradient(pf, beta, z))) / beta,
                flatness_order=order,
                flatness_coefficient=coefficient,
            )
        )
    return maxima


def _ascend(pf: PressureFunction, beta: float, start: np.ndarray) -> np.ndarray:
    result = optimize.minimize(
        lambda t: -phi_beta(pf, beta, t),
        start,
        jac=lambda t: -phi_beta_gradient(pf, beta, t),
        method="BFGS",
        options={"gtol": 1e-12, "maxiter": 1000},
    )
    z = np.asarray(result.x)
    for _ in range(NEWTON_STEPS):
        gradient = phi_beta_gradient(pf, beta, z)
        if np.linalg.norm(gradient) < 1e-14:
            break
        hessian = phi_beta_hessian(pf, beta, z)
        if _is_degenerate(hessian):
            break
        z = z - np.linalg.solve(hessian, gradient)
    return z


def _maxima_grid(pf, beta, K, grid_step, multistarts) -> list[Maximum]:
    points = min(int(math.ceil(2 * K / grid_step)) + 1, 101)
    axis = np.linspace(-K, K, points)
    mesh = np.stack(np.meshgrid(*([axis] * pf.q), indexing="ij"), axis=-1)
    T = mesh.reshape(-1, pf.q)
    values = phi_beta_values(pf, beta, T)

    grid_values = values.reshape(mesh.shape[:-1])
    peaks = np.flatnonzero(
        ndimage.maximum_filter(grid_values, size=3, mode="nearest").ravel() == values
    )
    starts = peaks[np.argsort(-values[peaks], kind="stable")][: 2 * multistarts]
    logger.debug(f"find_maxima: {len(peaks)} grid peaks, ascending from {len(starts)}")

    maxima: list[Maximum] = []
    for z in (_ascend(pf, beta, T[i]) for i in starts):
        if any(np.linalg.norm(z - m.z) < CLUSTER_RADIUS for m in maxima):
            continue
        hessian = phi_beta_hessian(pf, beta, z)
        maxima.append(
            Maximum(
                z=z,
                value=phi_beta(pf, beta, z),
                hessian=hessian,
                degenerate=_is_degenerate(hessian),
                residual=float(np.linalg.norm(phi_beta_gradient(pf, beta, z))) / beta,
                flatness_order=None,
            )
        )
    return maxima


def find_maxima(
    pf: PressureFunction,
    beta: float,
    K: float | None = None,
    grid_step: float | None = None,
    multistarts: int = 4,
    radial: bool = False,
) -> MaximaSet:
    """Global maximizers of phi_beta inside [-K, K]^q."""
    _check_beta(beta)
    K = K if K is not None else pf.default_search_box
    if K < 4 * pf.psi.sup_norm:
        raise ConfigError(f"Search box K={K} is below 4|psi|={4 * pf.psi.sup_norm}")
    if radial and pf.q != 2:
        raise ConfigError(f"Radial search needs q=2, got q={pf.q}")
    if grid_step is not None and not 0 < grid_step < K:
        raise ConfigError(f"Grid step must lie in (0, K={K}), got {grid_step}")
    if multistarts < 1:
        raise ConfigError(f"multistarts must be positive, got {multistarts}")

    if beta == 0:
        z = pf.gradient(np.zeros(pf.q))
        only = Maximum(
            z=z,
            value=pf.h_top,
            hessian=np.zeros((pf.q, pf.q)),
            degenerate=True,
            residual=0.0,
            flatness_order=None,
        )
        return MaximaSet(beta=0.0, maxima=[only], P2=only.value, search_box=K, radial=radial, note="phi_0 is constant; reporting z = grad P(0)")

    if pf.q == 1 or radial:
        step = grid_step or K / 1000
        direction = np.eye(pf.q)[0]
        candidates = _maxima_1d(pf, beta, K, step, direction, radial)
    else:
        step = grid_step or K / 10
        candidates = _maxima_grid(pf, beta, K, step, multistarts)

    if not candidates:
        raise ConfigError(f"No maximum of phi_{beta} found in [-{K}, {K}]^{pf.q}; refine the grid")
    best = max(m.value for m in candidates)
    maxima = [m for m in candidates if m.value >= best - VALUE_TOLERANCE]
    maxima.sort(key=lambda m: tuple(m.z))

    note = None
    if radial and any(np.linalg.norm(m.z) > CLUSTER_RADIUS for m in maxima):
        note = "circle of maximizers; radial representative on the first axis, tangential direction flat"
    elif any(m.degenerate for m in maxima):
        logger.warning(f"find_maxima: degenerate maximum at beta={beta}")

    logger.info(f"find_maxima: beta={beta} found {len(maxima)} maximum(s), P2={best!r}")
    return MaximaSet(beta=beta, maxima=maxima, P2=best, search_box=K, radial=radial, note=note)


def quadratic_pressure(pf: PressureFunction, beta: float, **kwargs) -> QuadraticPressure:
    """P2(beta) = max phi_beta, checked against phibar_beta at the maximizers."""
    maxima = find_maxima(pf, beta, **kwargs)
    gaps = [abs(m.value - phibar_beta(pf, beta, m.z)) for m in maxima.maxima]
    gap = float(max(gaps))
    if gap > COINCIDENCE_TOLERANCE:
        logger.warning(f"quadratic_pressure: phi and phibar differ by {gap:.3e} at beta={beta}")
    return QuadraticPressure(P2=maxima.P2, maxima=maxima, coincidence_gap=gap)


def equilibrium_states(pf: PressureFunction, maxima: MaximaSet) -> list[EquilibriumState]:
    """One DGM per maximizer z_j, with parameter t = beta z_j."""
    states = []
    for m in maxima.maxima:
        t = maxima.beta * m.z
        spectral = pf.spectral(t)
        expectation = spectral.mu @ pf.family.psi_values
        states.append(
            EquilibriumState(
                t=t,
                z=m.z,
                spectral=spectral,
                expectation=expectation,
                residual=float(np.linalg.norm(expectation - m.z)),
                note=maxima.note,
            )
        )
    return states
