"""Exact Dirac-Coulomb reference spectrum in three dimensions.

For V = -alpha/r the discrete spectrum is known in closed form,

    E(alpha)/m = [1 + alpha^2 / (n - j - 1/2 + sqrt((j+1/2)^2 - alpha^2))^2]^(-1/2),

with principal quantum number n >= 1 and total angular momentum j. These
values certify the shooting solver and supply an analytic dE/dalpha that the
Hellmann-Feynman machinery must reproduce. Energies are returned in units of
the particle mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "CoulombLevel",
    "coulomb_energy",
    "coulomb_energy_derivative",
    "channel_of",
]


@dataclass(frozen=True)
class CoulombLevel:
    """Quantum numbers (n, j) and coupling alpha of one Coulomb level."""

    n: int
    j: float
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        two_j = round(2 * self.j)
        if not math.isclose(2 * self.j, two_j) or two_j < 1 or two_j % 2 == 0:
            raise DomainError(f"j must be a positive half-odd integer, got {self.j}")
        n_r = self.n - self.j - 0.5
        if n_r < 0 or not math.isclose(n_r, round(n_r)):
            raise DomainError(
                f"(n={self.n}, j={self.j}) is not a valid level: n - j - 1/2 "
                f"must be a non-negative integer"
            )
        if not 0 < self.alpha < self.j + 0.5:
            raise DomainError(
                f"alpha must lie in (0, j + 1/2) = (0, {self.j + 0.5}); got {self.alpha}"
            )

    @property
    def n_r(self) -> int:
        """Radial label n - j - 1/2 (node count of the upper component)."""
        return round(self.n - self.j - 0.5)


def _pieces(level: CoulombLevel):
    s = math.sqrt((level.j + 0.5) ** 2 - level.alpha**2)
    big_n = level.n - level.j - 0.5 + s
    return s, big_n


def coulomb_energy(level: CoulombLevel) -> float:
    """E/m of the level; always in (0, 1)."""
    _, big_n = _pieces(level)
    return (1.0 + level.alpha**2 / big_n**2) ** -0.5


def coulomb_energy_derivative(level: CoulombLevel) -> float:
    """d(E/m)/d(alpha), analytic; strictly negative for every valid level."""
    s, big_n = _pieces(level)
    a = level.alpha
    u = a * a / big_n**2
    du = 2.0 * a / big_n**2 + 2.0 * a**3 / (big_n**3 * s)
    return -0.5 * (1.0 + u) ** -1.5 * du


def channel_of(level: CoulombLevel, tau: int, d: int = 3):
    """Solver inputs (ChannelSpec, node count) whose eigenvalue is this level.

    The closed form above is the three-dimensional spectrum, so d = 3 is
    required. The returned node count labels the solver's state by zeros of
    the upper radial component: that equals n - j - 1/2 in tau = -1 channels,
    and is one less in tau = +1 channels, whose lowest state (spectroscopic
    radial number 1) has a node-free upper component - the solver's node
    count is the ground truth this mapping was validated against. A tau = +1
    level with n - j - 1/2 = 0 does not exist and is rejected.
    """
    from .solver import ChannelSpec  # local import to avoid a cycle

    if d != 3:
        raise DomainError("the closed-form spectrum is the d = 3 one")
    if tau not in (-1, 1):
        raise DomainError(f"tau must be +-1, got {tau}")
    n_r = level.n_r
    if tau == 1:
        if n_r < 1:
            raise DomainError(
                f"(n={level.n}, j={level.j}, tau=+1) does not exist: the "
                f"tau=+1 series starts one level higher"
            )
        n_r -= 1
    return ChannelSpec(d=3, tau=tau, j=level.j), n_r
