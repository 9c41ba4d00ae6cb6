"""Finite-n probabilistic Gibbs measures and their limit mixtures.

The PGM at size n and inverse temperature beta has density
e^{-beta H_n} / Z_{n,beta} against the product measure rho^n, with
H_n = -|S_n psi|^2 / (2n).
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import gamma, gammaln, logsumexp

from .alphabet import enumerate_words
from .errors import (
    CapExceeded,
    ConfigError,
    DegenerateMaximum,
    DepthUnsupported,
    LowESS,
    Unsupported,
)
from .observables import Observable
from .potentials import PotentialVec
from .pressure import PressureFunction
from .quadratic import MaximaSet, find_maxima, phi_beta_values
from .transfer import SpectralData, cylinder_measure

logger = logging.getLogger(__name__)

DEFAULT_DP_CAP = 5_000_000
DEFAULT_BATCH_SIZE = 10_000
MIN_ESS = 100.0
DEFAULT_CONVERGENCE_TOL = 0.02

Proposal = Literal["product", "hubbard-stratonovich"]


@dataclass(frozen=True)
class PgmEstimate:
    n: int
    beta: float
    observable: dict
    value: float
    log_z: float
    method: str
    samples: int | None = None
    stderr: float | None = None
    ess: float | None = None
    proposal: str | None = None
    seed: int | None = None


def hamiltonian(psi: PotentialVec, sites) -> float:
    """H_n = -|S_n|^2 / (2n), windows of depth d wrapped periodically."""
    sites = np.asarray(sites)
    n = len(sites)
    if n < 1:
        raise ConfigError("Word must not be empty")
    windows = sites[(np.arange(n)[:, None] + np.arange(psi.depth)[None, :]) % n]
    S = psi.potential(windows).sum(axis=0)
    return -float(S @ S) / (2 * n)


def _compositions(total: int, parts: int, cap: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    count = math.comb(total + parts - 1, parts - 1)
    if count > cap:
        raise CapExceeded(f"{count} count vectors for n={total}, m={parts} exceed cap {cap}")
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total + 1):
        rest = _compositions(total - first, parts - 1, cap)
        blocks.append(np.column_stack([np.full(len(rest), first), rest]))
    return np.vstack(blocks)


def _log_sum(values: np.ndarray) -> float:
    # Sorted so that equal multisets give bit-identical sums
    return float(logsumexp(np.sort(values.ravel())))


class _TypeCounter:
    """log sum over admissible words with a fixed prefix of prod w * e^{(beta/2n)|S|^2}."""

    def __init__(self, pf: PressureFunction, n: int, beta: float, cap: int):
        self.pf = pf
        self.n = n
        self.beta = beta
        self.cap = cap
        self.m = pf.alphabet.size
        self.log_w = np.log(np.asarray(pf.alphabet.weights))
        self.symbol_psi = pf.psi.evaluate(pf.alphabet, np.arange(self.m)[:, None])
        self.A = pf.transition

    def _energy(self, counts: np.ndarray) -> np.ndarray:
        S = counts @ self.symbol_psi
        return self.beta / (2 * self.n) * np.sum(S * S, axis=-1)

    def prefix_log_sum(self, prefix: tuple[int, ...]) -> float:
        prefix_counts = np.bincount(prefix, minlength=self.m)
        prefix_weight = float(self.log_w[list(prefix)].sum())
        rest = self.n - len(prefix)
        if self.A.is_full:
            counts = _compositions(rest, self.m, self.cap)
            log_multinomial = gammaln(rest + 1) - gammaln(counts + 1).sum(axis=1)
            terms = log_multinomial + counts @ self.log_w + self._energy(counts + prefix_counts)
            return prefix_weight + _log_sum(terms)
        return prefix_weight + self._constrained(prefix, prefix_counts, rest)

    def _constrained(self, prefix, prefix_counts, rest) -> float:
        # table[c_0, ..., c_{m-2}, last]; the last count is implied by the length
        shape = (self.n + 1,) * (self.m - 1) + (self.m,)
        if math.prod(shape) > self.cap:
            raise CapExceeded(f"DP table of {math.prod(shape)} states exceeds cap {self.cap}")
        table = np.full(shape, -np.inf)
        table[tuple(prefix_counts[: self.m - 1]) + (prefix[-1],)] = 0.0
        for _ in range(rest):
            updated = np.full(shape, -np.inf)
            for b in range(self.m):
                sources = [a for a in range(self.m) if self.A.allows(a, b)]
                if not sources:
                    continue
                incoming = np.logaddexp.reduce(table[..., sources], axis=-1)
                if b < self.m - 1:
                    shifted = np.full(shape[:-1], -np.inf)
                    target = [slice(None)] * (self.m - 1)
                    source = [slice(None)] * (self.m - 1)
                    target[b] = slice(1, None)
                    source[b] = slice(None, -1)
                    shifted[tuple(target)] = incoming[tuple(source)]
                else:
                    shifted = incoming
                updated[..., b] = shifted + self.log_w[b]
            table = updated

        explicit = np.stack(np.meshgrid(*[np.arange(self.n + 1)] * (self.m - 1), indexing="ij"), axis=-1)
        implied = self.n - explicit.sum(axis=-1, keepdims=True)
        counts = np.concatenate([explicit, implied], axis=-1)
        valid = implied[..., 0] >= 0
        energy = np.where(valid, self._energy(np.maximum(counts, 0)), -np.inf)
        totals = np.logaddexp.reduce(table, axis=-1) + energy
        finite = totals[np.isfinite(totals)]
        return _log_sum(finite) if finite.size else -np.inf


def exact_pgm(
    pf: PressureFunction,
    n: int,
    beta: float,
    observable: Observable,
    cap: int = DEFAULT_DP_CAP,
) -> PgmEstimate:
    """Exact expectation by counting symbol types, conditioned on the first d symbols."""
    if pf.alphabet.is_circle:
        raise Unsupported("Exact PGM needs a finite alphabet")
    if pf.psi.depth != 1:
        raise DepthUnsupported(f"Exact PGM needs a depth-1 potential, got depth {pf.psi.depth}")
    if beta < 0:
        raise ConfigError(f"beta must be non-negative, got {beta}")
    if observable.depth > n:
        raise ConfigError(f"Observable depth {observable.depth} exceeds n={n}")

    counter = _TypeCounter(pf, n, beta, cap)
    prefixes = enumerate_words(pf.transition, observable.depth).as_array()
    log_sums = np.array([counter.prefix_log_sum(tuple(int(x) for x in p)) for p in prefixes])
    log_z = _log_sum(log_sums)
    f_values = observable(pf.alphabet.values[prefixes])
    value = float(np.sum(f_values * np.exp(log_sums - log_z)))

    logger.debug(f"exact_pgm: n={n} beta={beta} value={value!r} logZ={log_z!r}")
    return PgmEstimate(n=n, beta=beta, observable=observable.describe(), value=value, log_z=log_z, method="exact")


def _sample_product_batch(pf, n, beta, observable, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    alphabet = pf.alphabet
    if alphabet.is_circle:
        sites = rng.uniform(-np.pi, np.pi, size=(size, n))
    else:
        sites = alphabet.values[rng.choice(alphabet.size, size=(size, n), p=alphabet.weights)]
    depth = pf.psi.depth
    windows = sites[:, (np.arange(n)[:, None] + np.arange(depth)[None, :]) % n]
    S = pf.psi.potential(windows).sum(axis=1)
    log_w = beta / (2 * n) * np.sum(S * S, axis=1)
    return log_w, observable(sites[:, : observable.depth])


class _FieldEnvelope:
    """Piecewise-constant density for the auxiliary field, prop. to e^{n phi_beta}."""

    def __init__(self, pf: PressureFunction, n: int, beta: float):
        self.pf = pf
        self.n = n
        self.beta = beta
        self.radial = pf.q == 2
        K = pf.default_search_box
        cells = int(np.clip(math.ceil(40 * K * math.sqrt(n * max(beta, 1.0))), 2048, 20_000))
        lo = 0.0 if self.radial else -K
        self.edges = np.linspace(lo, K, cells + 1)
        self.width = self.edges[1] - self.edges[0]
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.log_mid = self._log_target(mids)
        self.log_norm = float(logsumexp(self.log_mid))
        self.probs = np.exp(self.log_mid - self.log_norm)

    def _points(self, x: np.ndarray) -> np.ndarray:
        if self.radial:
            return np.column_stack([x, np.zeros_like(x)])
        return x[:, None]

    def _log_target(self, x: np.ndarray) -> np.ndarray:
        log_target = self.n * phi_beta_values(self.pf, self.beta, self._points(x))
        if self.radial:
            log_target = log_target + np.log(np.maximum(x, 1e-300))
        return log_target

    def sample(self, rng, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Field magnitudes (or values) and log importance weights against e^{n phi}."""
        cells = rng.choice(len(self.probs), size=size, p=self.probs)
        x = self.edges[cells] + self.width * rng.uniform(size=size)
        # log of e^{n phi(z)} / g(z) with g normalized on the field space
        log_g = self.log_mid[cells] - self.log_norm - math.log(self.width)
        log_w = self.n * phi_beta_values(self.pf, self.beta, self._points(x)) - log_g
        if self.radial:
            # polar measure on R^2: dz = 2 pi r dr
            log_w = log_w + math.log(2 * math.pi) + np.log(np.maximum(x, 1e-300))
        return x, log_w


def _sample_field_batch(pf, envelope, beta, observable, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x, log_w = envelope.sample(rng, size)
    depth = observable.depth
    if envelope.radial:
        direction = rng.uniform(-np.pi, np.pi, size=size)
        sites = rng.vonmises(direction[:, None], beta * x[:, None], size=(size, depth))
    else:
        logits = beta * x[:, None] * pf.family.psi_values[:, 0][None, :] + np.log(pf.alphabet.weights)[None, :]
        probs = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        cumulative = np.cumsum(probs, axis=1)
        draws = rng.uniform(size=(size, depth, 1))
        index = np.minimum((draws > cumulative[:, None, :]).sum(axis=-1), pf.alphabet.size - 1)
        sites = pf.alphabet.values[index]
    return log_w, observable(sites)


def mc_pgm(
    pf: PressureFunction,
    n: int,
    beta: float,
    observable: Observable,
    samples: int,
    seed: int,
    proposal: Proposal = "product",
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
    min_ess: float = MIN_ESS,
) -> PgmEstimate:
    """Self-normalized importance sampling of the PGM expectation.

    ``product`` draws words from rho^n with weights e^{-beta H_n}.
    ``hubbard-stratonovich`` draws the auxiliary field z from an envelope of
    e^{n phi_beta(z)} and then the first sites i.i.d. from the tilted
    marginal; the joint law has the PGM as its word marginal.
    """
    if not pf.transition.is_full:
        raise Unsupported("Importance sampling from rho^n needs A identically 1")
    if samples < 1:
        raise ConfigError(f"samples must be positive, got {samples}")
    if observable.depth > n:
        raise ConfigError(f"Observable depth {observable.depth} exceeds n={n}")

    if proposal == "hubbard-stratonovich" and beta == 0:
        proposal = "product"
    if proposal == "hubbard-stratonovich":
        if not pf.is_product:
            raise Unsupported("Field sampling needs a depth-1 potential and A identically 1")
        if not (pf.q == 1 or (pf.q == 2 and pf.alphabet.is_circle)):
            raise Unsupported("Field sampling supports q=1 or the circle model")
        envelope = _FieldEnvelope(pf, n, beta)

        def run_batch(size, seed_seq):
            return _sample_field_batch(pf, envelope, beta, observable, size, seed_seq)

    elif proposal == "product":

        def run_batch(size, seed_seq):
            return _sample_product_batch(pf, n, beta, observable, size, seed_seq)

    else:
        raise ConfigError(f"Unknown proposal {proposal!r}")

    batches = math.ceil(samples / batch_size)
    sizes = [min(batch_size, samples - i * batch_size) for i in range(batches)]
    seed_seqs = np.random.SeedSequence(seed).spawn(batches)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run_batch, sizes, seed_seqs))

    log_w = np.concatenate([r[0] for r in results])
    f = np.concatenate([r[1] for r in results])
    shift = log_w.max()
    w = np.exp(log_w - shift)
    norm_w = w / w.sum()
    ess = float(1.0 / np.sum(norm_w**2))
    if ess < min_ess:
        raise LowESS(f"Effective sample size {ess:.1f} below {min_ess} (n={n}, beta={beta})", ess)

    value = float(norm_w @ f)
    stderr = float(np.sqrt(np.sum(norm_w**2 * (f - value) ** 2)))
    log_mean = shift + math.log(w.mean())
    if proposal == "hubbard-stratonovich":
        log_z = 0.5 * pf.q * math.log(n * beta / (2 * math.pi)) + log_mean
    else:
        log_z = log_mean

    logger.info(f"mc_pgm: n={n} beta={beta} value={value:.6g} stderr={stderr:.2g} ess={ess:.0f} ({proposal})")
    return PgmEstimate(
        n=n,
        beta=beta,
        observable=observable.describe(),
        value=value,
        log_z=log_z,
        method="mc",
        samples=samples,
        stderr=stderr,
        ess=ess,
        proposal=proposal,
        seed=seed,
    )


def hubbard_stratonovich_check(xi, nodes_per_dim: int = 64) -> float:
    """Relative error of tensor Gauss-Hermite quadrature for the HS identity."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    q = len(xi)
    if q > 3 or np.linalg.norm(xi) > 5 or not 1 <= nodes_per_dim <= 128:
        raise ConfigError(f"Need q<=3, |xi|<=5 and at most 128 nodes, got q={q}, nodes={nodes_per_dim}")
    nodes, weights = hermegauss(nodes_per_dim)
    points = np.stack([m.ravel() for m in np.meshgrid(*[nodes] * q, indexing="ij")], axis=1)
    log_weights = sum(m.ravel() for m in np.meshgrid(*[np.log(weights)] * q, indexing="ij"))
    log_quadrature = float(logsumexp(log_weights + math.sqrt(2) * points @ xi)) - 0.5 * q * math.log(2 * math.pi)
    log_exact = float(xi @ xi)
    return abs(math.expm1(log_quadrature - log_exact))


@dataclass(frozen=True, eq=False)
class MixtureComponent:
    z: np.ndarray
    weight: float
    t: np.ndarray
    spectral: SpectralData = field(repr=False)
    flatness_order: int | None = None

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "weight": self.weight,
            "t": self.t.tolist(),
            "nu": self.spectral.nu.tolist(),
            "flatness_order": self.flatness_order,
        }


@dataclass(frozen=True, eq=False)
class LimitMixture:
    beta: float
    components: list[MixtureComponent]

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def expectation(self, pf: PressureFunction, observable: Observable) -> float:
        """sum_j w_j int f d nu_j over cylinders of the observable's depth."""
        words = enumerate_words(pf.transition, observable.depth).as_array()
        f_values = observable(pf.alphabet.values[words])
        total = 0.0
        for component in self.components:
            nu_words, _ = cylinder_measure(pf.operator(component.t), component.spectral, words)
            total += component.weight * float(f_values @ nu_words)
        return total

    def to_dict(self) -> dict:
        return {"beta": self.beta, "components": [c.to_dict() for c in self.components]}


def _g_integral(pf: PressureFunction, spectral: SpectralData) -> float:
    """int G dP as the rho^d average of G over state words."""
    states = pf.family.states
    product_weights = np.prod(np.asarray(pf.alphabet.weights)[states], axis=1)
    return float(spectral.G @ product_weights)


def limit_mixture(pf: PressureFunction, beta: float, maxima: MaximaSet | None = None) -> LimitMixture:
    """Convex combination of conformal measures predicted for n -> infinity."""
    maxima = maxima or find_maxima(pf, beta)
    if maxima.radial and any(np.linalg.norm(m.z) > 1e-6 for m in maxima.maxima):
        raise Unsupported("Circle of maximizers: use the rotation-averaged measure instead")

    spectra = [pf.spectral(maxima.beta * m.z) for m in maxima.maxima]
    if len(maxima.maxima) == 1:
        m = maxima.maxima[0]
        return LimitMixture(
            beta=maxima.beta,
            components=[MixtureComponent(z=m.z, weight=1.0, t=maxima.beta * m.z, spectral=spectra[0], flatness_order=m.flatness_order)],
        )
    if not pf.transition.is_full:
        raise Unsupported("Mixture weights need int G dP, defined here only for A identically 1")

    g_integrals = np.array([_g_integral(pf, s) for s in spectra])
    if pf.q == 1:
        orders = [m.flatness_order for m in maxima.maxima]
        if any(order is None for order in orders):
            raise Unsupported("Flatness order beyond quartic; weights not determined")
        top = max(orders)
        raw = np.array(
            [
                g / top * gamma(1 / (2 * top)) * m.flatness_coefficient ** (-1 / (2 * top))
                if m.flatness_order == top
                else 0.0
                for g, m in zip(g_integrals, maxima.maxima, strict=True)
            ]
        )
    else:
        if maxima.degenerate:
            raise DegenerateMaximum(f"Mixture weights need non-degenerate maxima (beta={beta})")
        dets = np.array([abs(np.linalg.det(m.hessian)) for m in maxima.maxima])
        raw = g_integrals / np.sqrt(dets)

    weights = raw / raw.sum()
    components = [
        MixtureComponent(z=m.z, weight=float(w), t=maxima.beta * m.z, spectral=s, flatness_order=m.flatness_order)
        for m, w, s in zip(maxima.maxima, weights, spectra, strict=True)
    ]
    return LimitMixture(beta=maxima.beta, components=components)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    value: float
    prediction: float
    gap: float
    stderr: float | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    beta: float
    rows: list[ConvergenceRow]
    prediction: float
    tolerance: float
    passed: bool


def assess_convergence(rows: list[ConvergenceRow], tolerance: float) -> bool:
    """Gaps non-increasing over the last three n (up to 2 stderr for MC) and final gap below tolerance."""
    tail = rows[-3:]
    for earlier, later in itertools.pairwise(tail):
        slack = 2 * ((earlier.stderr or 0.0) + (later.stderr or 0.0))
        if later.gap > earlier.gap + slack:
            return False
    return tail[-1].gap < tolerance


def convergence_test(
    pf: PressureFunction,
    beta: float,
    observable: Observable,
    n_list,
    method: Literal["exact", "mc"] = "exact",
    samples: int = 100_000,
    seed: int = 0,
    tolerance: float = DEFAULT_CONVERGENCE_TOL,
    proposal: Proposal = "product",
    threads: int = 1,
    cap: int = DEFAULT_DP_CAP,
) -> ConvergenceTable:
    """PGM values at each n against the limit-mixture prediction."""
    n_list = sorted(int(n) for n in n_list)
    prediction = limit_mixture(pf, beta).expectation(pf, observable)

    rows = []
    for n in n_list:
        if method == "exact":
            estimate = exact_pgm(pf, n, beta, observable, cap)
        elif method == "mc":
            estimate = mc_pgm(pf, n, beta, observable, samples, seed, proposal=proposal, threads=threads)
        else:
            raise ConfigError(f"Unknown method {method!r}")
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
    logger.info(f"convergence_test: beta={beta} final gap={rows[-1].gap:.3e} {'PASS' if passed else 'FAIL'}")
    return ConvergenceTable(beta=beta, rows=rows, prediction=prediction, tolerance=tolerance, passed=passed)
