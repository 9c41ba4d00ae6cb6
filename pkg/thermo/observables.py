"""Cylinder observables f(omega_0, ..., omega_{d-1})."""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .alphabet import AlphabetSpec
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class Observable:
    """Vectorized function of the first ``depth`` site values."""

    name: str
    depth: int
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, sites: np.ndarray) -> np.ndarray:
        sites = np.asarray(sites)
        return np.broadcast_to(self.fn(sites), sites.shape[:-1]).astype(float)

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "depth": self.depth}


def constant(value: float = 1.0) -> Observable:
    return Observable(
        name=f"constant({value!r})",
        depth=1,
        fn=lambda sites: np.full(sites.shape[:-1], float(value)),
    )


def cylinder_indicator(alphabet: AlphabetSpec, pattern) -> Observable:
    """1 on the cylinder [pattern] given as a list of labels."""
    if alphabet.is_circle:
        raise ConfigError("Cylinder indicators need a finite alphabet")
    pattern = list(pattern)
    if not pattern:
        raise ConfigError("Cylinder pattern must not be empty")
    target = np.array([alphabet.index_of(label) for label in pattern], dtype=float)
    return Observable(
        name=f"1[{','.join(map(str, pattern))}]",
        depth=len(pattern),
        fn=lambda sites: np.all(sites == target, axis=-1).astype(float),
    )


def site_value(alphabet: AlphabetSpec) -> Observable:
    """f(omega) = numeric label of omega_0."""
    if alphabet.is_circle:
        raise ConfigError("site_value needs a finite alphabet with numeric labels")
    try:
        label_values = np.array([float(label) for label in alphabet.labels])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"site_value needs numeric labels: {e}") from e
    return Observable(
        name="omega_0",
        depth=1,
        fn=lambda sites: label_values[np.asarray(sites[..., 0], dtype=np.int64)],
    )


def angle_cosine() -> Observable:
    return Observable(name="cos(theta_0)", depth=1, fn=lambda s: np.cos(s[..., 0]))


def angle_correlation() -> Observable:
    return Observable(
        name="cos(theta_0-theta_1)",
        depth=2,
        fn=lambda s: np.cos(s[..., 0] - s[..., 1]),
    )


def observable_table(alphabet: AlphabetSpec, depth: int, values) -> Observable:
    """Explicit values on d-words, shape (size,) * depth."""
    table = np.asarray(values, dtype=float)
    if table.shape != (alphabet.size,) * depth:
        raise ConfigError(
            f"Observable table has shape {table.shape}, expected {(alphabet.size,) * depth}"
        )

    def fn(sites):
        index = np.asarray(sites, dtype=np.int64)
        return table[tuple(index[..., k] for k in range(depth))]

    return Observable(name=f"table(depth={depth})", depth=depth, fn=fn)


def observable_from_descriptor(alphabet: AlphabetSpec, descriptor: dict) -> Observable:
    """Build an observable from a JSON descriptor such as {"kind": "cylinder", "pattern": [1, 1]}."""
    kind = descriptor.get("kind")
    if kind == "cylinder":
        return cylinder_indicator(alphabet, descriptor.get("pattern", []))
    if kind == "site_value":
        return site_value(alphabet)
    if kind == "cos":
        return angle_cosine()
    if kind == "cos_diff":
        return angle_correlation()
    if kind == "constant":
        return constant(descriptor.get("value", 1.0))
    if kind == "table":
        return observable_table(alphabet, descriptor.get("depth", 1), descriptor.get("values"))
    raise ConfigError(f"Unknown observable kind {kind!r}")
