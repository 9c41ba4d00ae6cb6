"""Concrete potentials and the PotentialVec bundle used by the transfer operator."""

import logging
from dataclasses import dataclass

import numpy as np

from .alphabet import AlphabetKind, AlphabetSpec, TransitionFn, enumerate_words
from .errors import AlphabetError, ConfigError
from .interface import Potential, Requirements

logger = logging.getLogger(__name__)

# Pairwise Lipschitz estimate is skipped above this many d-words
LIPSCHITZ_WORD_LIMIT = 1024


class IndicatorPotential(Potential):
    """psi_i = 1_[i] on a finite alphabet (classical Curie-Weiss-Potts)."""

    depth = 1

    def __init__(self, size: int):
        self.q = size

    def __call__(self, sites: np.ndarray) -> np.ndarray:
        return np.eye(self.q)[np.asarray(sites[..., 0], dtype=np.int64)]

    def requirements(self) -> Requirements:
        return Requirements(alphabet_kind="finite", alphabet_size=self.q)


class PlusMinusPotential(Potential):
    """Scalar potential equal to the numeric label of the first symbol."""

    q = 1
    depth = 1

    def __init__(self, label_values):
        self.label_values = np.asarray(label_values, dtype=float)

    def __call__(self, sites: np.ndarray) -> np.ndarray:
        index = np.asarray(sites[..., 0], dtype=np.int64)
        return self.label_values[index][..., None]

    def requirements(self) -> Requirements:
        return Requirements(
            alphabet_kind="finite", alphabet_size=len(self.label_values)
        )


class XYPotential(Potential):
    """psi(omega) = (cos theta_0, sin theta_0) on the circle."""

    q = 2
    depth = 1

    def __call__(self, sites: np.ndarray) -> np.ndarray:
        angles = np.asarray(sites[..., 0], dtype=float)
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    def requirements(self) -> Requirements:
        return Requirements(alphabet_kind="circle")


class TablePotential(Potential):
    """Explicit table on d-words, shape (size,) * depth + (q,)."""

    def __init__(self, table):
        table = np.asarray(table, dtype=float)
        if table.ndim < 2:
            raise ConfigError(f"Potential table needs shape (size,)*depth + (q,), got {table.shape}")
        sizes = table.shape[:-1]
        if len(set(sizes)) != 1:
            raise ConfigError(f"Potential table is not square over words: {table.shape}")
        self.table = table
        self.depth = len(sizes)
        self.q = table.shape[-1]

    def __call__(self, sites: np.ndarray) -> np.ndarray:
        index = np.asarray(sites, dtype=np.int64)
        return self.table[tuple(index[..., k] for k in range(self.depth))]

    def requirements(self) -> Requirements:
        return Requirements(alphabet_kind="finite", alphabet_size=self.table.shape[0])


@dataclass(frozen=True, eq=False)
class PotentialVec:
    """A potential together with its sup-norm and Lipschitz estimate."""

    potential: Potential
    sup_norm: float
    lip_bound: float | None
    kind: str = "table"

    @property
    def q(self) -> int:
        return self.potential.q

    @property
    def depth(self) -> int:
        return self.potential.depth

    def evaluate(self, alphabet: AlphabetSpec, words: np.ndarray) -> np.ndarray:
        """psi on node-index words of shape (k, depth)."""
        words = np.asarray(words, dtype=np.int64)
        return self.potential(alphabet.values[words])


def _check_requirements(potential: Potential, alphabet: AlphabetSpec) -> None:
    req = potential.requirements()
    if req.alphabet_kind is not None and req.alphabet_kind != alphabet.kind.value:
        raise AlphabetError(
            f"{type(potential).__name__} needs a {req.alphabet_kind} alphabet, "
            f"got {alphabet.kind.value}"
        )
    if req.alphabet_size is not None and req.alphabet_size != alphabet.size:
        raise AlphabetError(
            f"{type(potential).__name__} expects {req.alphabet_size} symbols, "
            f"alphabet has {alphabet.size}"
        )


def _lipschitz_estimate(
    alphabet: AlphabetSpec, words: np.ndarray, values: np.ndarray
) -> float | None:
    if len(words) > LIPSCHITZ_WORD_LIMIT:
        logger.debug(f"Skipping Lipschitz estimate over {len(words)} words")
        return None
    if len(words) < 2:
        return 0.0
    metric = alphabet.distance_matrix()
    scale = 0.5 ** np.arange(1, words.shape[1] + 1)
    # Distance truncated to the first d coordinates bounds d_Omega from below
    dist = np.einsum("ijk,k->ij", metric[words[:, None, :], words[None, :, :]], scale)
    diff = np.linalg.norm(values[:, None, :] - values[None, :, :], axis=-1)
    off = dist > 0
    return float(np.max(diff[off] / dist[off])) if off.any() else 0.0


def build_potential_vec(
    potential: Potential,
    alphabet: AlphabetSpec,
    A: TransitionFn,
    kind: str = "table",
) -> PotentialVec:
    """Bundle a potential with sup-norm and Lipschitz data over admissible d-words."""
    _check_requirements(potential, alphabet)
    words = enumerate_words(A, potential.depth).as_array()
    values = potential(alphabet.values[words])
    if values.shape != (len(words), potential.q):
        raise ConfigError(
            f"Potential returned shape {values.shape}, expected {(len(words), potential.q)}"
        )
    sup_norm = float(np.max(np.linalg.norm(values, axis=1)))
    return PotentialVec(
        potential=potential,
        sup_norm=sup_norm,
        lip_bound=_lipschitz_estimate(alphabet, words, values),
        kind=kind,
    )


def potential_from_kind(
    kind: str, alphabet: AlphabetSpec, table=None
) -> Potential:
    """Instantiate a potential by its config kind."""
    if kind == "indicators":
        return IndicatorPotential(alphabet.size)
    if kind == "plusMinus":
        if alphabet.kind is not AlphabetKind.FINITE:
            raise AlphabetError("plusMinus potential needs a finite alphabet")
        try:
            label_values = [float(label) for label in alphabet.labels]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"plusMinus potential needs numeric labels: {e}") from e
        return PlusMinusPotential(label_values)
    if kind == "xy":
        return XYPotential()
    if kind == "table":
        if table is None:
            raise ConfigError("table potential needs a table")
        return TablePotential(table)
    raise ConfigError(f"Unknown potential kind {kind!r}")
