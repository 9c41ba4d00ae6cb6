"""Pydantic schemas for model and run configuration."""

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thermo.alphabet import (
    DEFAULT_WORD_CAP,
    TransitionFn,
    build_circle_alphabet,
    build_finite_alphabet,
)
from thermo.errors import ConfigError
from thermo.observables import Observable, observable_from_descriptor
from thermo.pgm import DEFAULT_DP_CAP
from thermo.potentials import build_potential_vec, potential_from_kind
from thermo.pressure import PressureFunction, SolverSettings
from thermo.transfer import DEFAULT_MAX_ITER, DEFAULT_TOL, DENSE_LIMIT, NONSIMPLE_TOL


class AlphabetConfig(BaseModel):
    """Single-site space: a finite labelled set or the discretized circle."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["finite", "circle"] = Field(
        default="finite", description="Finite label set or circle with Haar measure"
    )
    labels: list[int | float | str] = Field(
        default_factory=lambda: [1, 2, 3], description="Symbols of a finite alphabet"
    )
    weights: list[float] | None = Field(
        default=None,
        description="Probability of each label (uniform when omitted)",
    )
    nodes: int = Field(
        default=256, ge=4, description="Number of equispaced circle nodes"
    )


class PotentialConfig(BaseModel):
    """The observable vector psi."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["indicators", "plusMinus", "xy", "table"] = Field(
        default="indicators", description="Built-in potential or explicit table"
    )
    depth: int = Field(
        default=1, ge=1, description="Number of leading coordinates psi depends on"
    )
    table: list[Any] | None = Field(
        default=None,
        description="Nested list of shape (size,) * depth + (q,) for kind=table",
    )
    q: int | None = Field(
        default=None, ge=1, description="Expected dimension, checked when given"
    )


class SolverConfig(BaseModel):
    """Numerical tolerances and caps."""

    model_config = ConfigDict(extra="forbid")

    tol: float = Field(default=DEFAULT_TOL, gt=0, description="Eigen residual tolerance")
    max_iter: int = Field(
        default=DEFAULT_MAX_ITER, ge=1, description="Power iteration limit"
    )
    dense_limit: int = Field(
        default=DENSE_LIMIT, ge=1, description="Largest state count for dense eig"
    )
    nonsimple_tol: float = Field(
        default=NONSIMPLE_TOL,
        gt=0,
        description="Relative separation below which the leading eigenvalue is not simple",
    )
    mixing_max: int = Field(
        default=64, ge=1, description="Largest power tried when checking mixing of A"
    )
    word_cap: int = Field(
        default=DEFAULT_WORD_CAP, ge=1, description="Cap on enumerated words"
    )
    dp_cap: int = Field(
        default=DEFAULT_DP_CAP, ge=1, description="Cap on exact PGM table entries"
    )
    exploit_rank_one: bool = Field(
        default=True, description="Use the closed form when all kernel rows coincide"
    )

    def to_settings(self, threads: int = 1) -> SolverSettings:
        return SolverSettings(
            tol=self.tol,
            max_iter=self.max_iter,
            dense_limit=self.dense_limit,
            nonsimple_tol=self.nonsimple_tol,
            mixing_max=self.mixing_max,
            exploit_rank_one=self.exploit_rank_one,
            threads=threads,
            word_cap=self.word_cap,
        )


class ObservableConfig(BaseModel):
    """Cylinder observable used by PGM experiments."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["cylinder", "site_value", "cos", "cos_diff", "constant", "table"] = (
        Field(default="cylinder", description="Observable family")
    )
    pattern: list[int | float | str] = Field(
        default_factory=list, description="Labels of the cylinder for kind=cylinder"
    )
    value: float = Field(default=1.0, description="Value for kind=constant")
    depth: int = Field(default=1, ge=1, description="Depth for kind=table")
    values: list[Any] | None = Field(
        default=None, description="Nested list of shape (size,) * depth"
    )

    def build(self, pf: PressureFunction) -> Observable:
        return observable_from_descriptor(pf.alphabet, self.model_dump())


class ModelConfig(BaseModel):
    """Everything needed to reproduce one model: alphabet, A, psi, beta, solver."""

    model_config = ConfigDict(extra="forbid")

    alphabet: AlphabetConfig = Field(default_factory=AlphabetConfig)
    transition: list[list[int]] | None = Field(
        default=None, description="0/1 table on symbols (all ones when omitted)"
    )
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    counting: bool = Field(
        default=False, description="Use counting weights instead of rho"
    )
    beta: float = Field(default=1.0, ge=0.0, description="Inverse temperature")
    observable: ObservableConfig | None = Field(
        default=None, description="Observable for PGM experiments"
    )
    solver: SolverConfig = Field(default_factory=SolverConfig)
    seed: int = Field(default=0, ge=0, description="Monte-Carlo seed")

    @model_validator(mode="before")
    @classmethod
    def _hoist_transition(cls, data: Any) -> Any:
        """Accept A written inside the alphabet block, as alphabet documents do."""
        if not isinstance(data, dict) or not isinstance(data.get("alphabet"), dict):
            return data
        if "transition" not in data["alphabet"]:
            return data
        alphabet = dict(data["alphabet"])
        nested = alphabet.pop("transition")
        if data.get("transition") is not None and data["transition"] != nested:
            raise ValueError("'transition' given both at top level and inside 'alphabet' with different tables")
        return {**data, "alphabet": alphabet, "transition": nested}

    @model_validator(mode="after")
    def _check_circle(self) -> "ModelConfig":
        if self.alphabet.kind == "circle" and self.transition is not None:
            raise ValueError("Circle alphabets take A identically 1; drop 'transition'")
        return self

    def build(self, threads: int = 1) -> PressureFunction:
        """Assemble the pressure function this config describes."""
        if self.alphabet.kind == "circle":
            alphabet = build_circle_alphabet(self.alphabet.nodes)
        else:
            labels = self.alphabet.labels
            weights = self.alphabet.weights or [1.0 / len(labels)] * len(labels)
            alphabet = build_finite_alphabet(labels, weights)

        if self.transition is None:
            A = TransitionFn.full(alphabet.size)
        else:
            A = TransitionFn(np.asarray(self.transition))

        potential = potential_from_kind(self.potential.kind, alphabet, self.potential.table)
        if potential.depth != self.potential.depth:
            raise ConfigError(
                f"Potential has depth {potential.depth}, config says {self.potential.depth}"
            )
        if self.potential.q is not None and potential.q != self.potential.q:
            raise ConfigError(f"Potential has q={potential.q}, config says {self.potential.q}")

        psi = build_potential_vec(potential, alphabet, A, kind=self.potential.kind)
        return PressureFunction.from_parts(
            alphabet, A, psi, self.solver.to_settings(threads), counting=self.counting
        )

    def build_observable(self, pf: PressureFunction) -> Observable:
        if self.observable is None:
            raise ConfigError("This command needs an observable")
        return self.observable.build(pf)
