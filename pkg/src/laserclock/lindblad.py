"""Laser-mode master equation with pluggable gain, steady states and linewidths.

The Liouvillian is

    drho/dt = L_gain(rho) + kappa D[a] rho - i omega [n, rho]

with ``D[L] rho = L rho L^+ - {L^+ L, rho}/2``.  Gain options:

* ``HL_NOISELESS`` - kappa*mu*D[A] with A = a^+ (a a^+)^{-1/2}, the isometric
  raising operator A|n> = |n+1>.  Adds no phase noise.
* ``STANDARD_SURROGATE`` - the same gain plus pure number dephasing
  (kappa/4mu) D[n], which leaves every diagonal state alone and adds kappa/4mu
  to the linewidth, i.e. the gain contributes as much phase noise as the loss.
* ``NONE`` - a damped cavity.

Vectorization is row-major: vec(A rho B) = kron(A, B^T) vec(rho).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import FockSpace, mode_operators

# population allowed within BOUNDARY_LEVELS of the cutoff
BOUNDARY_POPULATION = 1e-8
BOUNDARY_LEVELS = 6


class GainKind(enum.Enum):
    HL_NOISELESS = "hl"
    STANDARD_SURROGATE = "standard"
    NONE = "none"

    @classmethod
    def parse(cls, value) -> "GainKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"hl": cls.HL_NOISELESS, "heisenberg": cls.HL_NOISELESS,
                   "hl_noiseless": cls.HL_NOISELESS, "standard": cls.STANDARD_SURROGATE,
                   "sql": cls.STANDARD_SURROGATE, "standard_surrogate": cls.STANDARD_SURROGATE,
                   "none": cls.NONE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown gain kind {value!r}") from None


class TruncationBoundaryError(RuntimeError):
    """Population reached the top of the truncated number basis."""


@dataclass(frozen=True)
class LiouvillianSpec:
    kappa: float
    mu: float
    gain: GainKind = GainKind.HL_NOISELESS
    omega: float = 0.0
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "gain", GainKind.parse(self.gain))
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not np.isfinite(self.omega):
            raise ValueError("omega must be finite")
        if self.dim is not None and self.dim < self.min_dim:
            raise ValueError(f"D={self.dim} is below the recommended {self.min_dim} for mu={self.mu}")

    @property
    def min_dim(self) -> int:
        return int(np.ceil(self.mu + 8 * np.sqrt(self.mu) + 10))

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.dim if self.dim is not None else self.min_dim)

    @property
    def dephasing_rate(self) -> float:
        return self.kappa / (4 * self.mu) if self.gain is GainKind.STANDARD_SURROGATE else 0.0

    def theory_linewidth(self) -> float:
        if self.gain is GainKind.HL_NOISELESS:
            return self.kappa / (4 * self.mu)
        if self.gain is GainKind.STANDARD_SURROGATE:
            return self.kappa / (2 * self.mu)
        raise ValueError("a cavity without gain has no steady-state linewidth")


def raising_isometry(space: FockSpace) -> np.ndarray:
    """a^+ (a a^+)^{-1/2}, with (a a^+)^{-1/2} taken as diag(1/sqrt(n+1))."""
    ops = mode_operators(space)
    return ops.a_dagger @ np.diag(1 / np.sqrt(np.arange(1, space.dim + 1)))


def _jump_terms(spec: LiouvillianSpec):
    """(rate, jump operator) pairs and the Hamiltonian of the master equation."""
    space = spec.space
    ops = mode_operators(space)
    terms = [(spec.kappa, ops.a)]
    if spec.gain is not GainKind.NONE:
        terms.append((spec.kappa * spec.mu, raising_isometry(space)))
    if spec.dephasing_rate:
        terms.append((spec.dephasing_rate, ops.n))
    return terms, spec.omega * ops.n


def _check_boundary(rho: np.ndarray) -> None:
    top = float(np.real(np.trace(rho[-BOUNDARY_LEVELS:, -BOUNDARY_LEVELS:])))
    if top > BOUNDARY_POPULATION:
        raise TruncationBoundaryError(
            f"population {top:.3g} within {BOUNDARY_LEVELS} levels of the cutoff D={rho.shape[0]}"
        )


def apply_liouvillian(spec: LiouvillianSpec, rho: np.ndarray, check_boundary: bool = True) -> np.ndarray:
    """drho/dt for the master equation described by ``spec``."""
    rho = np.asarray(rho, dtype=complex)
    if check_boundary:
        _check_boundary(rho)
    terms, H = _jump_terms(spec)
    out = -1j * (H @ rho - rho @ H)
    for rate, L in terms:
        Ld = L.conj().T
        LdL = Ld @ L
        out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def superoperator(spec: LiouvillianSpec) -> sp.csr_matrix:
    """Sparse D^2 x D^2 Liouvillian acting on row-major vec(rho)."""
    terms, H = _jump_terms(spec)
    D = spec.space.dim
    eye = sp.identity(D, dtype=complex, format="csr")
    Hs = sp.csr_matrix(H)
    S = -1j * (sp.kron(Hs, eye) - sp.kron(eye, Hs.T))
    for rate, L in terms:
        Ls = sp.csr_matrix(L)
        LdL = sp.csr_matrix(L.conj().T @ L)
        S = S + rate * (sp.kron(Ls, Ls.conj()) - 0.5 * (sp.kron(LdL, eye) + sp.kron(eye, LdL.T)))
    return sp.csr_matrix(S)


def band_indices(dim: int, k: int) -> np.ndarray:
    """Row-major vec indices of the elements rho[n, n-k]."""
    n = np.arange(max(k, 0), dim + min(k, 0))
    return n * dim + (n - k)


def _null_dimension(S: sp.csr_matrix, dim: int, rtol: float = 1e-9) -> int:
    # every term maps the band rho[n, n-k] into itself, so the null space
    # splits band by band into small dense problems
    total = 0
    for k in range(-(dim - 1), dim):
        idx = band_indices(dim, k)
        block = S[idx][:, idx].toarray()
        sv = np.linalg.svd(block, compute_uv=False)
        total += int(np.sum(sv <= rtol * max(sv.max(), 1.0)))
    return total


def steady_state(spec: LiouvillianSpec, check_unique: bool = True) -> np.ndarray:
    """Stationary state from the null space of the vectorized Liouvillian."""
    D = spec.space.dim
    if spec.gain is GainKind.NONE:
        rho = np.zeros((D, D), dtype=complex)
        rho[0, 0] = 1.0
        return rho

    S = superoperator(spec).tolil()
    if check_unique:
        nullity = _null_dimension(S.tocsr(), D)
        if nullity != 1:
            raise RuntimeError(f"Liouvillian null space has dimension {nullity}; truncation artifact?")
    # swap one equation for the trace condition
    S[0, :] = 0
    S[0, np.arange(D) * (D + 1)] = 1.0
    rhs = np.zeros(D * D, dtype=complex)
    rhs[0] = 1.0
    vec = spla.spsolve(S.tocsc(), rhs)
    rho = vec.reshape(D, D)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    _check_boundary(rho)
    return rho


def evolve(spec: LiouvillianSpec, rho0: np.ndarray, t_final: float, n_out: int = 2, dt: float | None = None):
    """Fixed-step RK4 integration; returns (times, states) at ``n_out`` points."""
    D = spec.space.dim
    dt_max = 1e-2 / (spec.kappa * (spec.mu + D))
    dt = dt_max if dt is None else min(dt, dt_max)
    out_times = np.linspace(0.0, t_final, n_out)
    states = [np.array(rho0, dtype=complex)]
    rho = states[0].copy()
    f = lambda r: apply_liouvillian(spec, r, check_boundary=False)  # noqa: E731
    for t0, t1 in zip(out_times[:-1], out_times[1:]):
        steps = max(1, int(np.ceil((t1 - t0) / dt)))
        h = (t1 - t0) / steps
        for _ in range(steps):
            k1 = f(rho)
            k2 = f(rho + 0.5 * h * k1)
            k3 = f(rho + 0.5 * h * k2)
            k4 = f(rho + h * k3)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_boundary(rho)
        states.append(rho.copy())
    return out_times, np.array(states)


@dataclass
class LinewidthResult:
    rate: float
    residual: float
    theory: float
    ratio: float
    flagged: bool
    times: np.ndarray = field(repr=False)
    g1: np.ndarray = field(repr=False)

    def as_record(self, spec: LiouvillianSpec) -> dict:
        return {
            "kappa": spec.kappa, "mu": spec.mu, "gain": spec.gain.value, "D": spec.space.dim,
            "linewidth_fit": self.rate, "theory": self.theory, "ratio": self.ratio,
            "residual": self.residual, "flagged": self.flagged,
        }


def g1_correlation(spec: LiouvillianSpec, times: np.ndarray, rho_ss: np.ndarray | None = None) -> np.ndarray:
    """g1(t) = Tr[a e^{Lt}(a^+ rho_ss)] by the quantum regression theorem.

    a^+ rho_ss lives entirely in the first sub-diagonal band, which the
    Liouvillian maps into itself, so only that block is propagated.
    """
    D = spec.space.dim
    if rho_ss is None:
        rho_ss = steady_state(spec)
    ops = mode_operators(spec.space)
    X = ops.a_dagger @ rho_ss
    idx = band_indices(D, 1)
    S = superoperator(spec)
    B = S[idx][:, idx].toarray()
    x = X.reshape(-1)[idx]
    # Tr(a X) = sum_n a[n, n+1] X[n+1, n]
    a_band = ops.a.T.reshape(-1)[idx]
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] != 0:
        raise ValueError("times must start at 0 and increase")
    steps = np.diff(times)
    uniform = np.allclose(steps, steps[0])
    prop = scipy.linalg.expm(B * steps[0]) if uniform else None
    out = np.empty(len(times), dtype=complex)
    out[0] = a_band @ x
    for i, h in enumerate(steps, start=1):
        x = (prop if uniform else scipy.linalg.expm(B * h)) @ x
        out[i] = a_band @ x
    return out


def g1_linewidth(spec: LiouvillianSpec, t_max: float | None = None, samples: int = 200,
                 residual_tol: float = 1e-3) -> LinewidthResult:
    """Fit |g1(t)| to a single exponential and report the spectral FWHM.

    A diffusing phase gives |g1| ~ exp(-ell t / 2), so the returned
    linewidth is twice the fitted amplitude decay rate.  Without ``t_max``
    the window runs from 0 to where |g1| has fallen to 0.1 of its start.
    """
    if spec.omega != 0:
        raise ValueError("linewidths are computed in the rotating frame (omega = 0)")
    theory = spec.theory_linewidth()
    rho_ss = steady_state(spec)
    if t_max is None:
        t_guess = 2 * np.log(10) / theory
        for _ in range(8):
            times = np.linspace(0, 2 * t_guess, 2 * samples + 1)
            g = np.abs(g1_correlation(spec, times, rho_ss))
            below = np.nonzero(g <= 0.1 * g[0])[0]
            if below.size:
                t_max = times[below[0]]
                break
            t_guess *= 2
        else:
            raise RuntimeError("|g1| never decayed to 0.1 of its initial value")
    times = np.linspace(0, t_max, samples + 1)
    g = g1_correlation(spec, times, rho_ss)
    mag = np.abs(g)
    slope, intercept = np.polyfit(times, np.log(mag), 1)
    fit = np.exp(intercept + slope * times)
    residual = float(np.sqrt(np.mean((mag - fit) ** 2)) / mag[0])
    rate = -2.0 * slope
    return LinewidthResult(
        rate=float(rate), residual=residual, theory=theory, ratio=float(rate / theory),
        flagged=residual > residual_tol, times=times, g1=g,
    )
