"""Single-mode states and operators on a truncated number basis.

Everything here works with dense numpy arrays.  A density matrix is a plain
``(D, D)`` complex array; :func:`check_density_matrix` enforces the usual
Hermiticity / trace / positivity invariants where a caller wants them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

# a coherent state is rejected when more Poisson weight than this falls past D-1
MAX_TAIL_WEIGHT = 1e-8


class TruncationError(ValueError):
    """The number-basis cutoff is too small for the requested state."""


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock space dimension must be an integer >= 2, got {self.dim}")

    @classmethod
    def for_amplitude(cls, alpha: complex, margin: int = 10) -> "FockSpace":
        """Smallest comfortable cutoff for a coherent amplitude ``alpha``."""
        r = abs(alpha)
        return cls(int(np.ceil(r * r + 8 * r + margin)))

    def basis(self, n: int) -> np.ndarray:
        if not 0 <= n < self.dim:
            raise IndexError(f"|{n}> is outside a space of dimension {self.dim}")
        v = np.zeros(self.dim, dtype=complex)
        v[n] = 1.0
        return v


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    # Poisson (or other) weight lost beyond the cutoff before renormalization
    tail_weight: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def expect(self, op: np.ndarray) -> complex:
        return complex(self.amplitudes.conj() @ op @ self.amplitudes)


@dataclass(frozen=True)
class ModeOperators:
    a: np.ndarray
    a_dagger: np.ndarray
    n: np.ndarray
    q: np.ndarray
    p: np.ndarray


def coherent_state(alpha: complex, space: FockSpace) -> StateVector:
    """Truncated coherent state |alpha>, renormalized on the kept levels.

    Amplitudes are built in log space so cutoffs of a few thousand levels do
    not overflow the factorial.  Raises :class:`TruncationError` when the
    Poisson tail beyond the cutoff exceeds ``MAX_TAIL_WEIGHT``.
    """
    alpha = complex(alpha)
    n = np.arange(space.dim)
    r = abs(alpha)
    if r == 0.0:
        return StateVector(space.basis(0), 0.0)

    tail = float(stats.poisson.sf(space.dim - 1, r * r))
    if tail > MAX_TAIL_WEIGHT:
        raise TruncationError(
            f"cutoff D={space.dim} loses Poisson weight {tail:.3g} for |alpha|={r:.4g}; "
            f"use D >= {FockSpace.for_amplitude(alpha).dim}"
        )
    log_mag = -0.5 * r * r + n * np.log(r) - 0.5 * special.gammaln(n + 1)
    amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    amps /= np.linalg.norm(amps)
    return StateVector(amps, tail)


def number_state(n: int, space: FockSpace) -> StateVector:
    return StateVector(space.basis(n))


def mode_operators(space: FockSpace) -> ModeOperators:
    a = np.diag(np.sqrt(np.arange(1, space.dim)), k=1).astype(complex)
    ad = a.conj().T
    return ModeOperators(
        a=a,
        a_dagger=ad,
        n=ad @ a,
        q=(a + ad) / np.sqrt(2),
        p=-1j * (a - ad) / np.sqrt(2),
    )


def check_density_matrix(rho: np.ndarray, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid state matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"density matrix is not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lam:.3g}")


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), 2 * np.pi)


@dataclass(frozen=True)
class PhaseDistribution:
    theta: np.ndarray
    values: np.ndarray
    mean: float
    variance: float

    @property
    def step(self) -> float:
        return 2 * np.pi / len(self.theta)

    def integral(self) -> float:
        # periodic trapezoid == plain Riemann sum on the uniform grid
        return float(self.values.sum() * self.step)


def canonical_phase_distribution(rho: np.ndarray, K: int | None = None) -> PhaseDistribution:
    """Canonical phase distribution P(theta) = (1/2pi) sum_nm rho_nm e^{i(m-n)theta}.

    The grid is uniform on [-pi, pi) with ``K`` points (default ``8 D``);
    ``K >= 4D`` resolves every harmonic present.  ``mean`` is the circular
    mean and ``variance`` the mean-square wrapped deviation about it.
    """
    rho = np.asarray(rho)
    D = rho.shape[0]
    if K is None:
        K = 8 * D
    if K < 4 * D:
        raise ValueError(f"phase grid K={K} is below 4*D={4 * D}")
    theta = -np.pi + 2 * np.pi * np.arange(K) / K
    E = np.exp(1j * np.outer(theta, np.arange(D)))
    vals = np.real(np.sum((E.conj() @ rho) * E, axis=1)) / (2 * np.pi)
    step = 2 * np.pi / K
    first = np.sum(vals * np.exp(1j * theta)) * step
    mean = float(np.angle(first)) if abs(first) > 1e-14 else 0.0
    dev = wrap_phase(theta - mean)
    var = float(np.sum(dev**2 * vals) * step)
    return PhaseDistribution(theta, vals, mean, var)


def overcompleteness_check(
    space: FockSpace,
    radius: float,
    n_radial: int = 200,
    n_angular: int | None = None,
    n_test: int | None = None,
) -> float:
    """Max deviation of (1/pi) int d^2alpha <n|alpha><alpha|m> from delta_nm.

    Brute-force polar quadrature: Gauss-Legendre in |alpha| on [0, radius],
    uniform trapezoid in arg(alpha).  Warns when the analytically known
    radial-cutoff loss accounts for most of the deviation.
    """
    n_test = space.dim if n_test is None else min(n_test, space.dim)
    if n_angular is None:
        n_angular = 4 * n_test + 4
    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * radius * (x + 1)
    wr = 0.5 * radius * w
    phi = 2 * np.pi * np.arange(n_angular) / n_angular
    wphi = 2 * np.pi / n_angular

    n = np.arange(n_test)
    # <n|alpha> on the (r, phi) grid
    logmag = -0.5 * r[:, None] ** 2 + n[None, :] * np.log(r[:, None]) - 0.5 * special.gammaln(n + 1)
    radial = np.exp(logmag)  # (R, n)
    phases = np.exp(1j * np.outer(phi, n))  # (P, n)
    ov = radial[:, None, :] * phases[None, :, :]  # (R, P, n)
    weights = (wr * r)[:, None] * wphi
    G = np.einsum("rp,rpn,rpm->nm", weights, ov, ov.conj()) / np.pi
    deviation = float(np.max(np.abs(G - np.eye(n_test))))

    cutoff_loss = float(np.max(special.gammaincc(n + 1, radius**2)))
    if cutoff_loss > 0.5 * deviation and cutoff_loss > 1e-12:
        warnings.warn(
            f"overcompleteness deviation {deviation:.3g} is dominated by the radial cutoff "
            f"(lost weight {cutoff_loss:.3g} beyond |alpha|={radius})",
            RuntimeWarning,
            stacklevel=2,
        )
    return deviation
