"""Two constructions of the laser steady state and the coherent splitting variance.

The phase-averaged mixture of coherent states and the Poissonian mixture of
number states are the same matrix; :func:`equality_report` measures how
closely the numerics agree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fock import FockSpace, canonical_phase_distribution, coherent_state


@dataclass(frozen=True)
class EnsembleSpec:
    mu: float
    dim: int | None = None
    n_phase: int | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mean photon number must be positive, got {self.mu}")
        if self.n_phase is not None and self.n_phase < 4 * self.space.dim:
            raise ValueError(f"n_phase={self.n_phase} is below 4*D={4 * self.space.dim}")

    @property
    def space(self) -> FockSpace:
        if self.dim is None:
            return FockSpace.for_amplitude(np.sqrt(self.mu))
        return FockSpace(self.dim)

    @property
    def phase_points(self) -> int:
        return 4 * self.space.dim if self.n_phase is None else self.n_phase


def phase_averaged_mixture(spec: EnsembleSpec) -> np.ndarray:
    """Uniform-phase average of |sqrt(mu) e^{i phi}><sqrt(mu) e^{i phi}|.

    Trapezoid over ``spec.phase_points`` phases; exact for every harmonic of
    the truncated matrix once the grid has at least ``D`` points.
    """
    space = spec.space
    alpha = np.sqrt(spec.mu)
    base = coherent_state(alpha, space).amplitudes
    K = spec.phase_points
    phis = 2 * np.pi * np.arange(K) / K
    # |alpha e^{i phi}> differs from |alpha> by e^{i n phi} per level
    vecs = base[None, :] * np.exp(1j * np.outer(phis, np.arange(space.dim)))
    return vecs.T @ vecs.conj() / K


def poisson_weights(mu: float, dim: int) -> np.ndarray:
    w = stats.poisson.pmf(np.arange(dim), mu)
    return w / w.sum()


def poisson_mixture(spec: EnsembleSpec) -> np.ndarray:
    """Diagonal number-state mixture with Poisson(mu) weights, renormalized."""
    return np.diag(poisson_weights(spec.mu, spec.space.dim)).astype(complex)


def equality_report(mu: float, dim: int | None = None) -> dict:
    spec = EnsembleSpec(mu, dim)
    diff = np.max(np.abs(phase_averaged_mixture(spec) - poisson_mixture(spec)))
    return {"mu": mu, "D": spec.space.dim, "max_abs_deviation": float(diff)}


def split_phase_variance(mu: float, M: int, dim: int | None = None) -> float:
    """Phase variance of one of ``M`` coherent pieces of amplitude sqrt(mu/M)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    share = mu / M
    if share < 16:
        warnings.warn(
            f"mu/M = {share:.3g} < 16: the 1/(4|alpha|^2) phase-variance law is inaccurate here",
            RuntimeWarning,
            stacklevel=2,
        )
    alpha = np.sqrt(share)
    space = FockSpace(dim) if dim is not None else FockSpace.for_amplitude(alpha)
    psi = coherent_state(alpha, space)
    return canonical_phase_distribution(psi.density_matrix()).variance
