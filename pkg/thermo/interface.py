"""Base interface for all potentials."""

from abc import ABC, abstractmethod

import numpy as np
from pydantic import BaseModel


class Requirements(BaseModel):
    """Alphabet requirements of a potential."""

    alphabet_kind: str | None = None
    alphabet_size: int | None = None


class Potential(ABC):
    """Abstract base class for vector potentials psi = (psi_1, ..., psi_q)."""

    q: int
    depth: int

    @abstractmethod
    def __call__(self, sites: np.ndarray) -> np.ndarray:
        """
        Evaluate the potential on words.

        Args:
            sites: Array of shape (..., depth) holding site values; node indices
                for finite alphabets, angles for the circle

        Returns:
            Array of shape (..., q)
        """
        pass

    def requirements(self) -> Requirements:
        return Requirements()
