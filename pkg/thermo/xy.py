"""Mean-field XY model: Bessel I0, the radial function phi_beta and its phases.

For psi(theta) = (cos theta, sin theta) under the Haar measure, P(t) = log I0(|t|),
so phi_beta only depends on x = |z|:

    phi_beta(x) = -(beta/2) x^2 + log I0(beta x)

The maximizer is 0 for beta < 2 and a unique r* in (sqrt((beta-2)/beta), 1]
for beta > 2.
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import gamma, i0, i0e, i1e

from .alphabet import TransitionFn, build_circle_alphabet
from .errors import ConfigError, DepthUnsupported, LaplaceHypothesisError
from .observables import Observable
from .pgm import ConvergenceRow, ConvergenceTable, assess_convergence, mc_pgm
from .potentials import XYPotential, build_potential_vec
from .pressure import PressureFunction, SolverSettings

logger = logging.getLogger(__name__)

CRITICAL_BETA = 2.0
BESSEL_MAX_ARGUMENT = 700.0
QUADRATURE_NODES = 512
MAX_ETA_EVALUATIONS = 20_000_000
ROOT_XTOL = 1e-15
CRITICAL_SCAN_POINTS = 10_000
LAPLACE_MIN_SCALE = 10.0
DEFAULT_CIRCLE_NODES = 256


def _check_bessel_argument(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > BESSEL_MAX_ARGUMENT) or not np.all(np.isfinite(x)):
        raise ConfigError(f"Bessel argument must lie in [0, {BESSEL_MAX_ARGUMENT}], got {x}")
    return x


def bessel_i0(x):
    """Modified Bessel function of order zero."""
    x = _check_bessel_argument(x)
    result = i0(x)
    return float(result) if result.ndim == 0 else result


def log_bessel_i0(x):
    """log I0(x), without overflow for large arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ConfigError(f"Bessel argument must be finite and non-negative, got {x}")
    result = np.log(i0e(x)) + x
    return float(result) if result.ndim == 0 else result


def bessel_ratio(x):
    """I0'(x) / I0(x) = I1(x) / I0(x)."""
    x = np.asarray(x, dtype=float)
    result = i1e(x) / i0e(x)
    return float(result) if result.ndim == 0 else result


def bessel_i0_series(x: float, terms: int = 200) -> float:
    """Power series sum_k (x/2)^{2k} / (k!)^2, accumulated term by term."""
    x = float(_check_bessel_argument(x))
    term = 1.0
    total = 1.0
    quarter = x * x / 4
    for k in range(1, terms):
        term *= quarter / (k * k)
        total += term
        if term < 1e-17 * total:
            break
    return total


def bessel_i0_quadrature(x: float, nodes: int = QUADRATURE_NODES) -> float:
    """(1/pi) int_0^pi e^{x cos y} dy by the trapezoidal rule."""
    x = float(_check_bessel_argument(x))
    y = np.linspace(0.0, np.pi, nodes + 1)
    values = np.exp(x * np.cos(y))
    return float((values.sum() - 0.5 * (values[0] + values[-1])) / nodes)


def xy_phi(beta: float, x: float) -> tuple[float, float, float]:
    """phi_beta(x) with its first and second derivatives."""
    if x < 0:
        raise ConfigError(f"x must be non-negative, got {x}")
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    y = beta * x
    phi = -0.5 * beta * x * x + log_bessel_i0(y)
    if x == 0:
        return phi, 0.0, beta * (beta / 2 - 1)
    ratio = bessel_ratio(y)
    first = beta * (ratio - x)
    second = -beta * beta * (ratio * ratio + ratio / y - 1 + 1 / beta)
    return phi, first, second


class Regime(str, Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class XyCriticalData:
    beta: float
    regime: Regime
    r_star: float
    phi_max: float
    second_derivative: float
    residual: float
    flatness_order: int | None = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["regime"] = self.regime.value
        return data


def _positive_root(beta: float, lo: float, hi: float) -> float | None:
    """Largest sign change + to - of phi' on [lo, hi], refined by brentq."""
    xs = np.linspace(lo, hi, CRITICAL_SCAN_POINTS + 1)[1:]
    slopes = beta * (bessel_ratio(beta * xs) - xs)
    crossings = np.nonzero((slopes[:-1] > 0) & (slopes[1:] <= 0))[0]
    if crossings.size == 0:
        return None
    k = crossings[-1]
    return brentq(lambda x: xy_phi(beta, x)[1], xs[k], xs[k + 1], xtol=ROOT_XTOL)


def xy_critical_point(beta: float) -> XyCriticalData:
    """Maximizer of phi_beta on [0, infinity) and the phase it belongs to."""
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")

    flatness_order = None
    if beta < CRITICAL_BETA:
        regime = Regime.SUBCRITICAL
        r_star = 0.0
    elif beta > CRITICAL_BETA:
        regime = Regime.SUPERCRITICAL
        lower = math.sqrt((beta - 2) / beta) + 1e-12
        r_star = brentq(lambda x: xy_phi(beta, x)[1], lower, 1.0, xtol=ROOT_XTOL)
    else:
        regime = Regime.CRITICAL
        found = _positive_root(beta, 0.0, 1.0)
        r_star = found if found is not None and found > 1e-6 else 0.0
        if r_star == 0.0:
            # phi''(0) = 0 here; the leading term at 0 is quartic
            flatness_order = 2

    phi, first, second = xy_phi(beta, r_star)
    residual = abs(bessel_ratio(beta * r_star) - r_star) if r_star > 0 else 0.0
    logger.debug(f"xy_critical_point: beta={beta} {regime.value} r*={r_star!r} residual={residual:.2e}")
    return XyCriticalData(
        beta=beta,
        regime=regime,
        r_star=r_star,
        phi_max=phi,
        second_derivative=second,
        residual=residual,
        flatness_order=flatness_order,
    )


def eta_expectation(x: float, observable: Observable, nodes: int = 128) -> float:
    """int f d eta_x: von Mises product measures averaged over the direction."""
    if x < 0:
        raise ConfigError(f"x must be non-negative, got {x}")
    depth = observable.depth
    if nodes < 8 or nodes ** (depth + 1) > MAX_ETA_EVALUATIONS:
        raise ConfigError(f"{nodes} nodes at depth {depth} exceeds the quadrature budget")

    angles = -np.pi + 2 * np.pi * np.arange(nodes) / nodes
    # weights[t, j] of site angle j under the marginal centred at direction t
    weights = np.exp(x * (np.cos(angles[None, :] - angles[:, None]) - 1))
    weights /= weights.sum(axis=1, keepdims=True)

    grids = np.meshgrid(*[angles] * depth, indexing="ij")
    f_values = observable(np.stack(grids, axis=-1))
    total = 0.0
    for direction in range(nodes):
        inner = f_values
        for _ in range(depth):
            inner = np.tensordot(weights[direction], inner, axes=(0, 0))
        total += float(inner)
    return total / nodes


@dataclass(frozen=True)
class LaplaceTail:
    alpha: float
    gamma: float
    n: float
    b_n: float
    integral: float
    asymptotic: float
    ratio: float


def laplace_tail(alpha: float, gamma_: float, n: float, b_n: float = math.inf) -> LaplaceTail:
    """int_0^{b_n} x^gamma e^{-n x^alpha} dx against Gamma((gamma+1)/alpha) / (alpha n^{(gamma+1)/alpha})."""
    if alpha <= 0 or gamma_ < 0 or n <= 0 or b_n <= 0:
        raise ConfigError(f"Need alpha > 0, gamma >= 0, n > 0, b_n > 0; got {alpha}, {gamma_}, {n}, {b_n}")
    if n * b_n**alpha < LAPLACE_MIN_SCALE:
        raise LaplaceHypothesisError(f"n * b_n^alpha = {n * b_n**alpha:.3g} is below {LAPLACE_MIN_SCALE}")

    exponent = (gamma_ + 1) / alpha
    # y = n^{1/alpha} x puts the mass of the integrand at y ~ 1
    upper = b_n * n ** (1 / alpha)
    if upper**alpha > BESSEL_MAX_ARGUMENT:
        upper = math.inf
    scaled, _ = quad(lambda y: y**gamma_ * math.exp(-(y**alpha)), 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=200)
    integral = scaled / n**exponent
    asymptotic = gamma(exponent) / (alpha * n**exponent)
    return LaplaceTail(
        alpha=alpha,
        gamma=gamma_,
        n=n,
        b_n=b_n,
        integral=integral,
        asymptotic=asymptotic,
        ratio=integral / asymptotic,
    )


def xy_model(m: int = DEFAULT_CIRCLE_NODES, settings: SolverSettings | None = None) -> PressureFunction:
    """Circle alphabet of m nodes with psi = (cos, sin)."""
    alphabet = build_circle_alphabet(m)
    A = TransitionFn.full(m)
    psi = build_potential_vec(XYPotential(), alphabet, A, kind="xy")
    return PressureFunction.from_parts(alphabet, A, psi, settings)


def xy_limit_check(
    beta: float,
    observable: Observable,
    n_list,
    samples: int,
    seed: int,
    m: int = DEFAULT_CIRCLE_NODES,
    threads: int = 1,
    tolerance: float = 0.02,
) -> ConvergenceTable:
    """Circle PGM by field-sampled Monte Carlo against int f d eta_{beta r*}."""
    if observable.depth > 2:
        raise DepthUnsupported(f"Observable depth {observable.depth} exceeds 2")
    pf = xy_model(m)
    critical = xy_critical_point(beta)
    prediction = eta_expectation(beta * critical.r_star, observable)

    rows = []
    for n in sorted(int(n) for n in n_list):
        estimate = mc_pgm(pf, n, beta, observable, samples, seed, proposal="hubbard-stratonovich", threads=threads)
        rows.append(
            ConvergenceRow(
                n=n,
                value=estimate.value,
                prediction=prediction,
                gap=abs(estimate.value - prediction),
                stderr=estimate.stderr,
            )
        )
    passed = assess_convergence(rows, tolerance)
    logger.info(f"xy_limit_check: beta={beta} prediction={prediction:.6g} {'PASS' if passed else 'FAIL'}")
    return ConvergenceTable(beta=beta, rows=rows, prediction=prediction, tolerance=tolerance, passed=passed)
