"""Discretized transfer operators and their leading spectral data.

The operator for phi = t . psi acts on depth-d cylinder functions. Indexing
convention: ``kernel[s, s2]`` is the weight carried from the preimage state
``s2 = (a, s_0, ..., s_{d-2})`` to the state ``s``, i.e.

    (L F)(s) = sum_{s2} kernel[s, s2] F(s2),
    kernel[s, s2] = w(a) exp(phi(s2)) A(a, s_0) 1[s2[1:] == s[:-1]].

G is the right Perron vector of ``kernel`` and nu the left one.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .alphabet import DEFAULT_WORD_CAP, AlphabetSpec, TransitionFn, enumerate_words
from .errors import DimensionMismatch, NoConvergence, NonSimpleLeading, NumericalError
from .observables import Observable
from .potentials import PotentialVec

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
DENSE_LIMIT = 512
NONSIMPLE_TOL = 1e-10
POLISH_STEPS = 3
DEFLATION_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """The t-independent part of L_{t.psi}: states, psi on states, weights."""

    alphabet: AlphabetSpec
    transition: TransitionFn
    psi: PotentialVec
    states: np.ndarray
    psi_values: np.ndarray
    structure: np.ndarray
    site_weights: np.ndarray
    counting: bool = False
    state_index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        alphabet: AlphabetSpec,
        A: TransitionFn,
        psi: PotentialVec,
        counting: bool = False,
        cap: int = DEFAULT_WORD_CAP,
    ) -> "OperatorFamily":
        if A.size != alphabet.size:
            raise DimensionMismatch(
                f"Transition table is {A.size}x{A.size}, alphabet has {alphabet.size} nodes"
            )
        states = enumerate_words(A, psi.depth, cap=cap).as_array()
        site_weights = np.ones(alphabet.size) if counting else np.array(alphabet.weights)

        heads = states[:, 0]
        compatible = A.entries[heads[None, :], states[:, 0][:, None]] > 0
        if psi.depth > 1:
            compatible &= np.all(states[None, :, 1:] == states[:, None, :-1], axis=-1)
        structure = np.where(compatible, site_weights[heads][None, :], 0.0)

        return cls(
            alphabet=alphabet,
            transition=A,
            psi=psi,
            states=states,
            psi_values=psi.evaluate(alphabet, states),
            structure=structure,
            site_weights=site_weights,
            counting=counting,
            state_index={tuple(int(x) for x in s): i for i, s in enumerate(states)},
        )

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def q(self) -> int:
        return self.psi.q

    @property
    def is_rank_one(self) -> bool:
        """All kernel rows coincide (A full and depth 1), for every t."""
        return bool(np.all(self.structure == self.structure[0]))

    def check_t(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.shape != (self.q,):
            raise DimensionMismatch(f"t has shape {t.shape}, potential has q={self.q}")
        if not np.all(np.isfinite(t)):
            raise DimensionMismatch(f"t must be finite, got {t}")
        return t

    def at(self, t) -> "DiscretizedTransfer":
        t = self.check_t(t)
        tilt = self.psi_values @ t
        return DiscretizedTransfer(
            family=self, t=t, kernel=self.structure * np.exp(tilt)[None, :]
        )


@dataclass(frozen=True, eq=False)
class DiscretizedTransfer:
    family: OperatorFamily
    t: np.ndarray
    kernel: np.ndarray

    @property
    def states(self) -> np.ndarray:
        return self.family.states

    @property
    def size(self) -> int:
        return self.family.size


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Leading spectral data (r, G, nu, gap) of one discretized operator."""

    r: float
    log_r: float
    G: np.ndarray
    nu: np.ndarray
    gap: float
    lambda2: float
    iterations: int
    solver: str

    @property
    def mu(self) -> np.ndarray:
        """Discretized DGM on states, G * nu."""
        return self.G * self.nu

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "logr": self.log_r,
            "gap": self.gap,
            "lambda2": self.lambda2,
            "iterations": self.iterations,
            "solver": self.solver,
            "G": self.G.tolist(),
            "nu": self.nu.tolist(),
        }


def assemble_operator(
    alphabet: AlphabetSpec,
    A: TransitionFn,
    psi: PotentialVec,
    t,
    counting: bool = False,
    mixing_max: int = 64,
) -> DiscretizedTransfer:
    """Discretized L_{t.psi}; verifies mixing of A first."""
    A = A.verified(mixing_max)
    return OperatorFamily.build(alphabet, A, psi, counting=counting).at(t)


def _normalize(G: np.ndarray, nu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    G = np.abs(G if G.sum() >= 0 else -G)
    nu = np.abs(nu if nu.sum() >= 0 else -nu)
    nu = nu / nu.sum()
    G = G / (G @ nu)
    return G, nu


def _residual(kernel: np.ndarray, r: float, G: np.ndarray, nu: np.ndarray) -> float:
    right = np.max(np.abs(kernel @ G - r * G)) / (r * np.max(np.abs(G)))
    left = np.max(np.abs(kernel.T @ nu - r * nu)) / (r * np.max(np.abs(nu)))
    return float(max(right, left))


def _solve_rank_one(kernel: np.ndarray) -> SpectralData:
    row = kernel[0]
    r = float(row.sum())
    nu = row / r
    return SpectralData(
        r=r,
        log_r=math.log(r),
        G=np.ones_like(row),
        nu=nu,
        gap=1.0,
        lambda2=0.0,
        iterations=0,
        solver="rank-one",
    )


def _solve_dense(kernel: np.ndarray, nonsimple_tol: float) -> SpectralData:
    eigvals, left, right = linalg.eig(kernel, left=True, right=True)
    moduli = np.abs(eigvals)
    # The Perron root has the largest real part among eigenvalues of maximal modulus
    lead = int(np.argmax(eigvals.real))
    leading = eigvals[lead]
    if leading.real <= 0 or abs(leading.imag) > 1e-8 * moduli[lead]:
        raise NumericalError(f"Leading eigenvalue {leading} is not real positive")

    others = np.delete(moduli, lead)
    lambda2 = float(others.max()) if others.size else 0.0
    r = float(leading.real)
    if lambda2 >= r * (1.0 - nonsimple_tol):
        raise NonSimpleLeading(f"|lambda2| = {lambda2!r} is within tolerance of r = {r!r}")

    G, nu = _normalize(right[:, lead].real, left[:, lead].real)
    for _ in range(POLISH_STEPS):
        G, nu = _normalize(kernel @ G, kernel.T @ nu)
    r = float(nu @ kernel @ G / (nu @ G))

    return SpectralData(
        r=r,
        log_r=math.log(r),
        G=G,
        nu=nu,
        gap=1.0 - lambda2 / r,
        lambda2=lambda2,
        iterations=POLISH_STEPS,
        solver="dense",
    )


def _power_vector(matrix: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    vector = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for iteration in range(1, max_iter + 1):
        updated = matrix @ vector
        updated /= updated.sum()
        if np.max(np.abs(updated - vector)) <= tol * np.max(np.abs(updated)):
            return updated, iteration
        vector = updated
    raise NoConvergence(f"Power iteration did not converge in {max_iter} steps", max_iter)


def _solve_power(
    kernel: np.ndarray, tol: float, max_iter: int, nonsimple_tol: float
) -> SpectralData:
    G, right_iters = _power_vector(kernel, tol, max_iter)
    nu, left_iters = _power_vector(kernel.T, tol, max_iter)
    G, nu = _normalize(G, nu)
    r = float(nu @ kernel @ G / (nu @ G))

    # Deflated power iteration: K - r G nu^T (nu.G = 1) has spectral radius |lambda2|
    rng = np.random.default_rng(0)
    x = rng.standard_normal(len(G))
    x /= np.linalg.norm(x)
    ratios = []
    steps = min(max_iter, DEFLATION_MAX_ITER)
    for _ in range(steps):
        y = kernel @ x - r * G * (nu @ x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            ratios = [0.0]
            break
        ratios.append(norm)
        x = y / norm
    tail = np.asarray(ratios[-20:])
    lambda2 = float(np.exp(np.mean(np.log(tail)))) if tail.min() > 0 else 0.0
    if lambda2 >= r * (1.0 - nonsimple_tol):
        raise NonSimpleLeading(f"|lambda2| ~ {lambda2!r} is within tolerance of r = {r!r}")

    return SpectralData(
        r=r,
        log_r=math.log(r),
        G=G,
        nu=nu,
        gap=1.0 - lambda2 / r,
        lambda2=lambda2,
        iterations=right_iters + left_iters + len(ratios),
        solver="power",
    )


def spectral_solve(
    op: DiscretizedTransfer,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    dense_limit: int = DENSE_LIMIT,
    nonsimple_tol: float = NONSIMPLE_TOL,
    exploit_rank_one: bool = True,
) -> SpectralData:
    """Leading eigenvalue, eigenfunction G and eigenmeasure nu of ``op``."""
    kernel = op.kernel
    if exploit_rank_one and op.family.is_rank_one:
        data = _solve_rank_one(kernel)
    elif op.size <= dense_limit:
        data = _solve_dense(kernel, nonsimple_tol)
    else:
        data = _solve_power(kernel, tol, max_iter, nonsimple_tol)

    residual = _residual(kernel, data.r, data.G, data.nu)
    limit = max(tol, 10 * op.size * np.finfo(float).eps)
    if residual > limit:
        raise NoConvergence(
            f"Eigen residual {residual:.3e} above {limit:.3e} ({data.solver})",
            data.iterations,
        )
    logger.debug(
        f"spectral_solve: t={op.t.tolist()} solver={data.solver} r={data.r!r} gap={data.gap:.6g}"
    )
    return data


def log_radius_by_iteration(op: DiscretizedTransfer, n: int, state: int = 0) -> float:
    """(1/n) log (L^n 1)(state), renormalizing the iterate at every step."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    vector = np.ones(op.size)
    log_scale = 0.0
    for _ in range(n):
        vector = op.kernel @ vector
        scale = vector.max()
        log_scale += math.log(scale)
        vector /= scale
    return (log_scale + math.log(vector[state])) / n


@dataclass(frozen=True)
class CorrelationDecay:
    values: np.ndarray
    ratio: float
    fitted_constant: float

    def envelope(self, factor: float = 1.5) -> np.ndarray:
        """factor * ratio**(n-1) * c_1, the geometric envelope normalized at n = 1."""
        n = np.arange(1, len(self.values) + 1)
        return factor * self.ratio ** (n - 1) * self.values[0]


def _on_states(op: DiscretizedTransfer, observable: Observable) -> np.ndarray:
    if observable.depth > op.states.shape[1]:
        raise DimensionMismatch(
            f"Observable depth {observable.depth} exceeds state depth {op.states.shape[1]}"
        )
    sites = op.family.alphabet.values[op.states[:, : observable.depth]]
    return np.asarray(observable(sites), dtype=float)


def correlation_decay(
    op: DiscretizedTransfer,
    f: Observable,
    g: Observable,
    n_max: int,
    spectral: SpectralData | None = None,
) -> CorrelationDecay:
    """c_n = |int f g o sigma^n dmu - int f dmu int g dmu| on the discretized chain."""
    spectral = spectral or spectral_solve(op)
    f_values = _on_states(op, f)
    g_values = _on_states(op, g)
    mu = spectral.mu
    # Normalized operator: rows sum to one
    chain = op.kernel * spectral.G[None, :] / (spectral.r * spectral.G[:, None])

    baseline = (mu @ f_values) * (mu @ g_values)
    values = np.empty(n_max)
    pushed = f_values
    for n in range(n_max):
        pushed = chain @ pushed
        values[n] = abs(mu @ (g_values * pushed) - baseline)

    ratio = spectral.lambda2 / spectral.r
    if ratio > 0:
        fitted = float(np.max(values / ratio ** np.arange(1, n_max + 1)))
    else:
        fitted = float(values[0])
    return CorrelationDecay(values=values, ratio=ratio, fitted_constant=fitted)


def cylinder_measure(
    op: DiscretizedTransfer, spectral: SpectralData, words: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """nu and mu of cylinders [word] for node-index words of any length.

    Longer words use conformality, nu[a w] = w_a e^{phi(a w)} A(a, w_0) nu[w] / r;
    shorter words are marginals of the state weights.
    """
    family = op.family
    depth = family.states.shape[1]
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    length = words.shape[1]
    tilt = np.exp(family.psi_values @ op.t)

    nu_words = np.zeros(len(words))
    mu_words = np.zeros(len(words))
    if length < depth:
        for i, word in enumerate(words):
            match = np.all(family.states[:, :length] == word, axis=1)
            nu_words[i] = spectral.nu[match].sum()
            mu_words[i] = spectral.mu[match].sum()
        return nu_words, mu_words

    A = family.transition
    for i, word in enumerate(words):
        last = family.state_index.get(tuple(int(x) for x in word[length - depth :]))
        if last is None:
            continue
        value = spectral.nu[last]
        for j in range(length - depth - 1, -1, -1):
            state = family.state_index.get(tuple(int(x) for x in word[j : j + depth]))
            if state is None or not A.allows(word[j], word[j + 1]):
                value = 0.0
                break
            value *= family.site_weights[word[j]] * tilt[state] / spectral.r
        first = family.state_index[tuple(int(x) for x in word[:depth])] if value else None
        nu_words[i] = value
        mu_words[i] = spectral.G[first] * value if first is not None else 0.0
    return nu_words, mu_words
