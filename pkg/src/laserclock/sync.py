"""Clock-synchronisation limits for M parties sharing one laser.

Closed forms (mu = laser photon number, M = parties):

    HL          sqrt(M) / (4 mu)     noiseless gain, adaptive locking
    SQL         sqrt(M) / (2 mu)     standard gain, dual-homodyne locking
    split       M / (4 mu)           one coherent state cut into M pieces
    physical    sqrt(hbar omega M ell / P)

and a Monte Carlo that locks M independent trackers to one diffusing source.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .lindblad import GainKind
from .tracking import BeamSpec, adaptive_track, nonadaptive_track

HBAR = 1.054571817e-34  # J s
SPEED_OF_LIGHT = 299_792_458.0  # m / s
VISIBLE_WAVELENGTH = 600e-9  # m


def hl_bound(mu: float, M: float) -> float:
    _check(mu, M)
    return np.sqrt(M) / (4 * mu)


def sql_bound(mu: float, M: float) -> float:
    _check(mu, M)
    return np.sqrt(M) / (2 * mu)


def split_coherent_bound(mu: float, M: float) -> float:
    _check(mu, M)
    return M / (4 * mu)


def _check(mu, M):
    if not mu > 0:
        raise ValueError("mu must be positive")
    if M < 1:
        raise ValueError("need at least one party")


@dataclass(frozen=True)
class SyncBudget:
    mu: float
    M: int
    kappa: float = 1.0

    @property
    def ell_hl(self) -> float:
        return self.kappa / (4 * self.mu)

    @property
    def ell_sql(self) -> float:
        return self.kappa / (2 * self.mu)

    @property
    def flux(self) -> float:
        """Photons per unit time reaching each party."""
        return self.kappa * self.mu / self.M

    @property
    def N_hl(self) -> float:
        return self.flux / self.ell_hl

    @property
    def N_sql(self) -> float:
        return self.flux / self.ell_sql

    @property
    def hl(self) -> float:
        return hl_bound(self.mu, self.M)

    @property
    def sql(self) -> float:
        return sql_bound(self.mu, self.M)

    @property
    def split_coherent(self) -> float:
        return split_coherent_bound(self.mu, self.M)

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("ell_hl", "ell_sql", "flux", "N_hl", "N_sql", "hl", "sql", "split_coherent"):
            d[k] = getattr(self, k)
        return d


@dataclass(frozen=True)
class PhysicalBudget:
    power: float  # W
    omega: float  # rad / s
    linewidth: float  # 1 / s
    M: float = 1

    def __post_init__(self):
        if min(self.power, self.omega, self.linewidth, self.M) <= 0:
            raise ValueError("power, frequency, linewidth and M must all be positive")

    @property
    def bound(self) -> float:
        return float(np.sqrt(HBAR * self.omega * self.M * self.linewidth / self.power))

    @property
    def photon_flux(self) -> float:
        """Photons per second reaching each party."""
        return self.power / (HBAR * self.omega * self.M)

    @property
    def photons_per_coherence_time(self) -> float:
        return self.photon_flux / self.linewidth


def physical_bound(power: float, linewidth: float, M: float = 1, omega: float | None = None,
                   wavelength: float = VISIBLE_WAVELENGTH) -> PhysicalBudget:
    """Synchronisation error for a real laser of given power and linewidth."""
    if omega is None:
        omega = 2 * np.pi * SPEED_OF_LIGHT / wavelength
    return PhysicalBudget(power, omega, linewidth, M)


@dataclass
class EndToEndResult:
    mu: float
    M: int
    kappa: float
    gain: str
    mse: float
    stderr: float
    bound: float
    ratio: float
    excluded: int
    trajectories: int
    raw_mse: float | None = None
    raw_stderr: float | None = None
    error_correlation: float | None = None
    error_correlation_se: float | None = None

    def as_record(self) -> dict:
        return asdict(self)


def end_to_end_mc(mu: float, M: int, kappa: float = 1.0, gain_kind=GainKind.HL_NOISELESS,
                  trajectories: int = 1000, seed=0, linewidth: float | None = None,
                  control_variate: bool = True, **track_kw) -> EndToEndResult:
    """Lock M trackers to one laser and compare their mean-square error to the bound.

    The source phase diffuses at the linewidth of the chosen gain (kappa/4mu
    for the noiseless gain, kappa/2mu for the standard one) unless
    ``linewidth`` overrides it.  The noiseless-gain laser is tracked
    adaptively, the standard one with dual homodyne.  Every party gets flux
    kappa mu / M and its own measurement noise; the source path is shared.
    """
    gain_kind = GainKind.parse(gain_kind)
    budget = SyncBudget(mu, M, kappa)
    if gain_kind is GainKind.HL_NOISELESS:
        ell, track, bound = budget.ell_hl, adaptive_track, budget.hl
    elif gain_kind is GainKind.STANDARD_SURROGATE:
        ell, track, bound = budget.ell_sql, nonadaptive_track, budget.sql
    else:
        raise ValueError("a laser without gain has no steady-state linewidth")
    if linewidth is not None:
        ell = linewidth
    beam = BeamSpec(budget.flux, ell)
    if beam.N < 100:
        raise ValueError(f"N = p/ell = {beam.N:.3g} is below 100; the locking formulas do not apply")
    run = track(beam, seed=seed, n_traj=trajectories, n_parties=M, control_variate=control_variate, **track_kw)

    corr = corr_se = None
    if run.party_errors is not None and len(run.party_errors):
        # pairwise correlation coefficients of the time-averaged error products
        C = run.party_errors
        var = np.einsum("tii->ti", C)
        iu = np.triu_indices(M, 1)
        rho = C[:, iu[0], iu[1]] / np.sqrt(var[:, iu[0]] * var[:, iu[1]])
        per_traj = rho.mean(axis=1)
        corr = float(per_traj.mean())
        corr_se = float(per_traj.std(ddof=1) / np.sqrt(len(per_traj)))

    return EndToEndResult(
        mu=mu, M=M, kappa=kappa, gain=gain_kind.value, mse=run.mse, stderr=run.stderr, bound=bound,
        ratio=run.mse / bound, excluded=run.excluded, trajectories=trajectories,
        raw_mse=run.raw_mse, raw_stderr=run.raw_stderr,
        error_correlation=corr, error_correlation_se=corr_se,
    )


def shared_source_correlation(ell: float, gain: float) -> float:
    """Correlation between two trackers' errors when they lock to the same source.

    Both errors inherit the source's diffusion: covariance ell / (4 chi A) and
    variance (ell + chi^2) / (4 chi A) for either loop, so the ratio is
    ell / (ell + chi^2) - one half at the optimal gain.
    """
    return ell / (ell + gain**2)
