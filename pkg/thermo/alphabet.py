"""Single-site spaces, transition tables and admissible words."""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Literal

import numpy as np

from .errors import AlphabetError, CapExceeded, NotMixing

logger = logging.getLogger(__name__)

# Weights must sum to one within this before being renormalized
WEIGHT_SUM_TOLERANCE = 1e-12

MIN_CIRCLE_NODES = 4

DEFAULT_WORD_CAP = 1_000_000


class AlphabetKind(str, Enum):
    """Kind of single-site space."""

    FINITE = "finite"
    CIRCLE = "circle"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AlphabetSpec:
    """Discretized single-site space (E, rho).

    ``values`` holds the numeric site value of each node: the node index for
    finite alphabets and the angle for the circle. Potentials and observables
    are evaluated on these values.
    """

    kind: AlphabetKind
    labels: tuple
    values: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def is_circle(self) -> bool:
        return self.kind is AlphabetKind.CIRCLE

    def index_of(self, label) -> int:
        """Node index of a label; angles match to 1e-12 on the circle."""
        if self.is_circle:
            matches = np.flatnonzero(np.abs(self.values - float(label)) < 1e-12)
            if matches.size == 0:
                raise AlphabetError(f"Angle {label!r} is not a circle node")
            return int(matches[0])
        for index, candidate in enumerate(self.labels):
            if candidate == label or str(candidate) == str(label):
                return index
        raise AlphabetError(f"Unknown label {label!r}; known labels: {self.labels}")

    def distance(self, i: int, j: int) -> float:
        """Metric on nodes: discrete for finite sets, chordal on the circle."""
        if self.is_circle:
            return float(
                np.hypot(
                    math.cos(self.values[i]) - math.cos(self.values[j]),
                    math.sin(self.values[i]) - math.sin(self.values[j]),
                )
            )
        return 0.0 if i == j else 1.0

    def distance_matrix(self) -> np.ndarray:
        if self.is_circle:
            points = np.column_stack([np.cos(self.values), np.sin(self.values)])
            return np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
        return 1.0 - np.eye(self.size)

    def integrate(self, samples: np.ndarray) -> float:
        """Quadrature of node samples against rho."""
        return float(self.weights @ np.asarray(samples, dtype=float))


def build_finite_alphabet(labels, weights) -> AlphabetSpec:
    """Build a finite alphabet with probability weights."""
    labels = tuple(labels)
    if not labels:
        raise AlphabetError("Alphabet needs at least one label")
    if len(set(map(str, labels))) != len(labels):
        raise AlphabetError(f"Duplicate labels in {labels}")

    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(labels),):
        raise AlphabetError(
            f"Expected {len(labels)} weights, got shape {weights.shape}"
        )
    if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
        raise AlphabetError(f"Weights must be strictly positive, got {weights}")
    total = weights.sum()
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise AlphabetError(f"Weights sum to {total!r}, expected 1")

    return AlphabetSpec(
        kind=AlphabetKind.FINITE,
        labels=labels,
        values=_frozen(np.arange(len(labels), dtype=float)),
        weights=_frozen(weights / total),
    )


def build_circle_alphabet(m: int) -> AlphabetSpec:
    """Equispaced trapezoidal discretization of the circle with Haar weights."""
    if m < MIN_CIRCLE_NODES:
        raise AlphabetError(f"Circle needs at least {MIN_CIRCLE_NODES} nodes, got {m}")
    if m % 2:
        logger.warning(f"build_circle_alphabet: odd node count {m}; even is recommended")

    angles = -np.pi + 2.0 * np.pi * np.arange(m) / m
    return AlphabetSpec(
        kind=AlphabetKind.CIRCLE,
        labels=tuple(float(a) for a in angles),
        values=_frozen(angles),
        weights=_frozen(np.full(m, 1.0 / m)),
    )


@dataclass(frozen=True, eq=False)
class TransitionFn:
    """Boolean transition table A on nodes."""

    entries: np.ndarray
    mixing_time: int | None = None

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise AlphabetError(f"Transition table must be square, got {entries.shape}")
        if not np.isin(entries, (0, 1)).all():
            raise AlphabetError("Transition entries must be 0 or 1")
        entries = entries.astype(np.int8)
        if not entries.any(axis=1).all() or not entries.any(axis=0).all():
            raise AlphabetError("Every row and column of A needs at least one 1")
        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def full(cls, size: int) -> "TransitionFn":
        return cls(np.ones((size, size), dtype=np.int8), mixing_time=1)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def is_full(self) -> bool:
        return bool(self.entries.all())

    def allows(self, a: int, b: int) -> bool:
        return bool(self.entries[a, b])

    def verified(self, n_max: int) -> "TransitionFn":
        """Copy with ``mixing_time`` set by :func:`check_mixing`."""
        if self.mixing_time is not None:
            return self
        return replace(self, mixing_time=check_mixing(self, n_max))


def check_mixing(A: TransitionFn, n_max: int) -> int:
    """Least N <= n_max whose N-step boolean power of A is all ones."""
    step = (A.entries > 0).astype(np.int64)
    power = step.copy()
    for n in range(1, n_max + 1):
        if power.all():
            logger.debug(f"check_mixing: mixing time {n}")
            return n
        power = ((power @ step) > 0).astype(np.int64)
    raise NotMixing(f"No boolean power of A up to {n_max} is full")


@dataclass(frozen=True)
class WordConstraint:
    """Endpoint constraint on enumerated words.

    ``terminal`` b keeps words whose last symbol z_n has A(z_n, b) = 1;
    ``endpoints`` (a, b) additionally asks A(a, z_1) = 1.
    """

    kind: Literal["free", "terminal", "endpoints"] = "free"
    first: int | None = None
    last: int | None = None

    @classmethod
    def free(cls) -> "WordConstraint":
        return cls()

    @classmethod
    def terminal(cls, b: int) -> "WordConstraint":
        return cls(kind="terminal", last=b)

    @classmethod
    def endpoints(cls, a: int, b: int) -> "WordConstraint":
        return cls(kind="endpoints", first=a, last=b)


@dataclass(frozen=True)
class WordSet:
    length: int
    constraint: WordConstraint
    words: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.words)

    def as_array(self) -> np.ndarray:
        return np.array(self.words, dtype=np.int64).reshape(len(self.words), self.length)


def count_words(A: TransitionFn, n: int, constraint: WordConstraint) -> int:
    """Number of admissible words, by exact integer matrix powers."""
    step = [[int(x) for x in row] for row in A.entries]
    size = A.size
    if constraint.kind == "endpoints":
        current = [step[constraint.first][j] for j in range(size)]
    else:
        current = [1] * size
    for _ in range(n - 1):
        current = [
            sum(current[i] * step[i][j] for i in range(size)) for j in range(size)
        ]
    if constraint.kind == "free":
        return sum(current)
    return sum(current[i] for i in range(size) if step[i][constraint.last])


def enumerate_words(
    A: TransitionFn,
    n: int,
    constraint: WordConstraint | None = None,
    cap: int = DEFAULT_WORD_CAP,
) -> WordSet:
    """All admissible n-words under ``constraint`` in lexicographic order."""
    constraint = constraint or WordConstraint.free()
    if n < 1:
        raise AlphabetError(f"Word length must be positive, got {n}")
    total = count_words(A, n, constraint)
    if total > cap:
        raise CapExceeded(f"{total} admissible words of length {n} exceed cap {cap}")

    size = A.size
    if constraint.kind == "endpoints":
        words = [(j,) for j in range(size) if A.allows(constraint.first, j)]
    else:
        words = [(j,) for j in range(size)]
    for _ in range(n - 1):
        words = [w + (j,) for w in words for j in range(size) if A.allows(w[-1], j)]
    if constraint.kind != "free":
        words = [w for w in words if A.allows(w[-1], constraint.last)]

    return WordSet(length=n, constraint=constraint, words=tuple(words))
