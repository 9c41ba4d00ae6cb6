"""Pressure P(t) = log r_{t.psi}, its derivatives, and the Legendre entropy."""

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .alphabet import DEFAULT_WORD_CAP, AlphabetSpec, TransitionFn
from .errors import AmbiguousBoundary, ConfigError
from .potentials import PotentialVec
from .transfer import (
    DENSE_LIMIT,
    NONSIMPLE_TOL,
    DiscretizedTransfer,
    OperatorFamily,
    SpectralData,
    spectral_solve,
)

logger = logging.getLogger(__name__)

# Memo entries kept before the cache is reset
MAX_CACHE_ENTRIES = 200_000

# Absolute tolerance on decreases of t.z - P(t) along a ray
FLAT_TOLERANCE = 1e-9

# Per-dimension entropy grid sizes
DEFAULT_ENTROPY_GRID = {1: 201, 2: 41}
FALLBACK_ENTROPY_GRID = 21


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-12
    max_iter: int = 10_000
    dense_limit: int = DENSE_LIMIT
    nonsimple_tol: float = NONSIMPLE_TOL
    mixing_max: int = 64
    exploit_rank_one: bool = True
    threads: int = 1
    word_cap: int = DEFAULT_WORD_CAP


@dataclass(frozen=True, eq=False)
class PressurePoint:
    t: np.ndarray
    P: float
    grad: np.ndarray
    hess: np.ndarray | None = None


class EntropyStatus(str, Enum):
    FINITE = "finite"
    MINUS_INFINITY = "minusInfinity"
    BOUNDARY = "boundary"


@dataclass(frozen=True, eq=False)
class EntropyValue:
    z: np.ndarray
    H: float
    status: EntropyStatus
    argmin: np.ndarray | None = None

    @property
    def is_finite(self) -> bool:
        return self.status is not EntropyStatus.MINUS_INFINITY


@dataclass(frozen=True, eq=False)
class DualityReport:
    one_sided_violation: float
    reconstruction_error: float
    entropies: list[EntropyValue] = field(repr=False)


class SpectralCache:
    """Memo of SpectralData keyed by t, guarded by one reentrant lock."""

    def __init__(self, max_entries: int = MAX_CACHE_ENTRIES):
        self._entries: dict[tuple[float, ...], SpectralData] = {}
        self._max_entries = max_entries
        self._lock = threading.RLock()
        self._hits = 0
        self._misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: tuple[float, ...]) -> SpectralData | None:
        with self._lock:
            value = self._entries.get(key)
            if value is not None:
                self._hits += 1
            return value

    def put(self, key: tuple[float, ...], value: SpectralData) -> SpectralData:
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            if len(self._entries) >= self._max_entries:
                logger.debug(f"SpectralCache: resetting after {len(self._entries)} entries")
                self._entries = {}
            self._misses += 1
            self._entries[key] = value
            return value

    def get_status_info(self) -> dict[str, int]:
        with self._lock:
            return {"entries": len(self._entries), "hits": self._hits, "misses": self._misses}


class PressureFunction:
    """P(t) for a fixed (alphabet, A, psi), with memoized spectral solves."""

    def __init__(self, family: OperatorFamily, settings: SolverSettings | None = None):
        self.family = family
        self.settings = settings or SolverSettings()
        self.cache = SpectralCache()

    @classmethod
    def from_parts(
        cls,
        alphabet: AlphabetSpec,
        A: TransitionFn,
        psi: PotentialVec,
        settings: SolverSettings | None = None,
        counting: bool = False,
    ) -> "PressureFunction":
        settings = settings or SolverSettings()
        A = A.verified(settings.mixing_max)
        return cls(
            OperatorFamily.build(alphabet, A, psi, counting=counting, cap=settings.word_cap),
            settings,
        )

    @property
    def alphabet(self) -> AlphabetSpec:
        return self.family.alphabet

    @property
    def transition(self) -> TransitionFn:
        return self.family.transition

    @property
    def psi(self) -> PotentialVec:
        return self.family.psi

    @property
    def q(self) -> int:
        return self.family.q

    @property
    def is_product(self) -> bool:
        """A full and depth-1 psi: PGM and DGMs are product measures."""
        return self.family.is_rank_one and self.psi.depth == 1

    @property
    def default_search_box(self) -> float:
        return 4.0 * self.psi.sup_norm + 1.0

    @property
    def h_top(self) -> float:
        return self.value(np.zeros(self.q))

    def operator(self, t) -> DiscretizedTransfer:
        return self.family.at(t)

    def spectral(self, t) -> SpectralData:
        t = self.family.check_t(t)
        key = tuple(float(x) for x in t)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        s = self.settings
        data = spectral_solve(
            self.family.at(t),
            tol=s.tol,
            max_iter=s.max_iter,
            dense_limit=s.dense_limit,
            nonsimple_tol=s.nonsimple_tol,
            exploit_rank_one=s.exploit_rank_one,
        )
        return self.cache.put(key, data)

    def value(self, t) -> float:
        return self.spectral(t).log_r

    def gradient(self, t) -> np.ndarray:
        """Expectation of psi under the DGM G * nu."""
        return self.spectral(t).mu @ self.family.psi_values

    def pressure(self, t) -> PressurePoint:
        t = self.family.check_t(t)
        data = self.spectral(t)
        return PressurePoint(t=t, P=data.log_r, grad=data.mu @ self.family.psi_values)

    def pressure_values(self, T) -> np.ndarray:
        """P on the rows of T; closed form for rank-one kernels."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if self.family.is_rank_one and self.settings.exploit_rank_one:
            row = self.family.structure[0]
            return logsumexp(self.family.psi_values @ T.T, b=row[:, None], axis=0)
        return np.array([self.value(t) for t in T])

    def pressure_gradients(self, T) -> np.ndarray:
        """grad P on the rows of T; softmax closed form for rank-one kernels."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if self.family.is_rank_one and self.settings.exploit_rank_one:
            row = self.family.structure[0]
            logits = T @ self.family.psi_values.T + np.log(row)[None, :]
            weights = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
            return weights @ self.family.psi_values
        return np.array([self.gradient(t) for t in T])

    def hessian_pressure(self, t, h: float = 1e-4) -> np.ndarray:
        """Central differences of the analytic gradient, symmetrized."""
        if not 1e-6 <= h <= 1e-2:
            raise ConfigError(f"Hessian step must lie in [1e-6, 1e-2], got {h}")
        t = self.family.check_t(t)
        columns = []
        for j in range(self.q):
            step = np.zeros(self.q)
            step[j] = h
            columns.append((self.gradient(t + step) - self.gradient(t - step)) / (2 * h))
        hess = np.column_stack(columns)
        return 0.5 * (hess + hess.T)

    def _legendre_objective(self, z: np.ndarray):
        def objective(t):
            point = self.pressure(t)
            return point.P - t @ z, point.grad - z

        return objective

    def _grid(self, K: float, points: int) -> np.ndarray:
        axis = np.linspace(-K, K, points)
        return np.array(list(itertools.product(axis, repeat=self.q)))

    def _descend(self, z: np.ndarray, start: np.ndarray) -> tuple[np.ndarray, float]:
        result = optimize.minimize(
            self._legendre_objective(z),
            start,
            jac=True,
            method="BFGS",
            options={"gtol": 1e-10, "maxiter": 500},
        )
        if np.max(np.abs(result.jac)) > 1e-6:
            logger.debug(f"entropy_legendre: descent ended with |grad| {np.max(np.abs(result.jac)):.2e} at z={z.tolist()}")
        return np.asarray(result.x), float(result.fun)

    def _radial_test(
        self, z: np.ndarray, start: np.ndarray, start_value: float
    ) -> EntropyValue:
        base = float(np.linalg.norm(start))
        direction = start / base
        radii = np.array([base, 2 * base, 4 * base, 8 * base])
        values = np.array([start_value] + [self.value(R * direction) - R * direction @ z for R in radii[1:]])
        decreases = values[:-1] - values[1:]
        slopes = decreases / np.diff(radii)

        if np.any(decreases < -FLAT_TOLERANCE):
            best = int(np.argmin(values))
            t_opt, H = self._descend(z, radii[best] * direction)
            return EntropyValue(z=z, H=min(H, values[best]), status=EntropyStatus.FINITE, argmin=t_opt)
        if np.all(np.abs(decreases) <= FLAT_TOLERANCE):
            return EntropyValue(z=z, H=start_value, status=EntropyStatus.FINITE, argmin=start)
        if slopes[2] > FLAT_TOLERANCE and slopes[2] >= 0.25 * slopes[1]:
            return EntropyValue(z=z, H=-np.inf, status=EntropyStatus.MINUS_INFINITY)
        if decreases[2] <= FLAT_TOLERANCE or slopes[2] < 0.25 * slopes[1]:
            logger.warning(f"entropy_legendre: z={z.tolist()} lies on the boundary of the mean set")
            return EntropyValue(z=z, H=float(values[-1]), status=EntropyStatus.BOUNDARY)
        raise AmbiguousBoundary(
            f"Slope test inconclusive at z={z.tolist()}: decreases {decreases.tolist()}"
        )

    def entropy_legendre(
        self,
        z,
        K_search: float | None = None,
        grid: int | None = None,
        refine: bool = True,
    ) -> EntropyValue:
        """H(z) = inf_t {P(t) - t.z} by grid scan, local descent and a radial slope test."""
        z = self.family.check_t(z)
        K = K_search if K_search is not None else self.default_search_box
        if K <= 0:
            raise ConfigError(f"K_search must be positive, got {K}")
        points = grid or DEFAULT_ENTROPY_GRID.get(self.q, FALLBACK_ENTROPY_GRID)

        T = self._grid(K, points)
        F = self.pressure_values(T) - T @ z
        best = int(np.argmin(F))
        t_best, F_best = T[best], float(F[best])

        if np.max(np.abs(t_best)) >= K * (1 - 1e-12):
            return self._radial_test(z, t_best, F_best)
        if not refine:
            return EntropyValue(z=z, H=F_best, status=EntropyStatus.FINITE, argmin=t_best)

        t_opt, H = self._descend(z, t_best)
        if np.linalg.norm(t_opt) > 8 * K:
            return self._radial_test(z, t_opt, H)
        if H > F_best:
            t_opt, H = t_best, F_best
        return EntropyValue(z=z, H=H, status=EntropyStatus.FINITE, argmin=t_opt)

    def entropy_profile(self, z_grid, **kwargs) -> list[EntropyValue]:
        """entropy_legendre over rows of z_grid, in order."""
        z_grid = np.atleast_2d(np.asarray(z_grid, dtype=float))
        if self.q == 1 and z_grid.shape[0] == 1 and z_grid.shape[1] > 1:
            z_grid = z_grid.T
        with ThreadPoolExecutor(max_workers=max(1, self.settings.threads)) as pool:
            return list(pool.map(lambda z: self.entropy_legendre(z, **kwargs), z_grid))

    def duality_check(self, t_grid, z_grid, **kwargs) -> DualityReport:
        """One-sided Young violation and reconstruction error of P from H."""
        t_grid = np.asarray(t_grid, dtype=float).reshape(-1, self.q)
        z_grid = np.asarray(z_grid, dtype=float).reshape(-1, self.q)
        entropies = self.entropy_profile(z_grid, **kwargs)

        finite = [e for e in entropies if e.is_finite]
        P = self.pressure_values(t_grid)
        H = np.array([e.H for e in finite])
        Z = np.array([e.z for e in finite]).reshape(-1, self.q)
        # young[i, j] = H(z_j) + t_i.z_j
        young = H[None, :] + t_grid @ Z.T

        return DualityReport(
            one_sided_violation=float(np.max(young - P[:, None])),
            reconstruction_error=float(np.max(np.abs(P - young.max(axis=1)))),
            entropies=entropies,
        )
