"""Diffusing-phase beams and homodyne phase tracking.

The source phase is a Wiener process, dphi = sqrt(ell) dxi.  A homodyne
detector with local-oscillator phase Phi sees the photocurrent

    dy = 2 sqrt(p) sin(phi - Phi) dt + dW,

and the tracker integrates a gain-chi filter of that current.

* adaptive: Phi follows the running estimate, dphihat = chi dy.  Linearised
  error variance (ell + chi^2) / (4 chi sqrt(p)), minimised at chi = sqrt(ell)
  to 1 / (2 sqrt(N)) with N = p / ell.
* non-adaptive (dual homodyne): the beam is split into two arms of flux p/2
  measured at the fixed LO phases 0 and pi/2; the two records are combined
  into a phase-error signal.  Variance (ell + chi^2) / (2 chi sqrt(2 p)),
  minimum 1 / sqrt(2 N).

All trajectories of a run are advanced together as numpy arrays.  With
``control_variate=True`` each trajectory also carries the linearised loop
driven by the same noise; its exactly known discrete-time mean is used to
cancel most of the sampling noise in the reported MSE (the plain average is
kept in ``raw_mse``).  Phase noise
and measurement noise come from independent child streams of one
``SeedSequence``, so a (seed, dt, T, spec) tuple reproduces a run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .fock import wrap_phase

# lock is lost when |error| > pi/2 for most of a window this many filter time constants long
LOCK_LOSS_WINDOW = 5.0
MAX_EXCLUDED_FRACTION = 0.01


@dataclass(frozen=True)
class BeamSpec:
    flux: float  # photons per unit time
    linewidth: float = 0.0  # phase diffusion rate ell

    def __post_init__(self):
        if not self.flux > 0:
            raise ValueError("photon flux must be positive")
        if self.linewidth < 0:
            raise ValueError("linewidth must be non-negative")

    @property
    def N(self) -> float:
        return np.inf if self.linewidth == 0 else self.flux / self.linewidth

    @classmethod
    def from_N(cls, N: float, linewidth: float = 1.0) -> "BeamSpec":
        return cls(flux=N * linewidth, linewidth=linewidth)


def _streams(seed, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_phase_path(spec: BeamSpec, dt: float, T: float, seed=0, n_paths: int | None = None,
                        wrapped: bool = True) -> np.ndarray:
    """Euler-Maruyama path(s) of dphi = sqrt(ell) dxi starting at phi = 0.

    Returns shape ``(steps + 1,)`` or ``(n_paths, steps + 1)``.  Accumulation
    is unwrapped; the result is wrapped to (-pi, pi] unless ``wrapped=False``.
    """
    steps = int(round(T / dt))
    (rng,) = _streams(seed, 1)
    shape = (steps,) if n_paths is None else (n_paths, steps)
    inc = np.sqrt(spec.linewidth * dt) * rng.standard_normal(shape)
    path = np.concatenate([np.zeros(shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)
    return wrap_phase(path) if wrapped else path


def homodyne_record(spec: BeamSpec, phi, lo_phase, dt: float, seed=0) -> np.ndarray:
    """Photocurrent increments dy_k = 2 sqrt(p) sin(phi_k - Phi_k) dt + dW_k."""
    phi = np.asarray(phi, dtype=float)
    lo_phase = np.asarray(lo_phase, dtype=float)
    if phi.shape != lo_phase.shape:
        raise ValueError("signal and local-oscillator phase paths must be aligned")
    (rng,) = _streams(seed, 1)
    noise = np.sqrt(dt) * rng.standard_normal(phi.shape)
    return 2 * np.sqrt(spec.flux) * np.sin(phi - lo_phase) * dt + noise


def phase_autocorrelation(spec: BeamSpec, lags, n_paths: int = 10_000, dt: float | None = None, seed=0):
    """Ensemble mean of exp(i (phi(t + tau) - phi(0))) and its standard error."""
    lags = np.asarray(lags, dtype=float)
    if dt is None:
        dt = 1e-2 * (lags.min() if lags.min() > 0 else 1.0)
    path = simulate_phase_path(spec, dt, lags.max(), seed, n_paths, wrapped=False)
    idx = np.round(lags / dt).astype(int)
    z = np.exp(1j * (path[:, idx] - path[:, :1]))
    mean = z.mean(axis=0)
    se = np.std(z.real, axis=0, ddof=1) / np.sqrt(n_paths)
    return mean, se


def lorentzian(omega, amplitude, center, hwhm, offset):
    return amplitude * hwhm**2 / ((omega - center) ** 2 + hwhm**2) + offset


@dataclass
class Lineshape:
    omega: np.ndarray
    power: np.ndarray
    fwhm: float
    center: float


def lineshape(spec: BeamSpec, n_paths: int = 10_000, T: float | None = None, dt: float | None = None,
              seed=0, batch: int = 1000, fit_span: float = 20.0) -> Lineshape:
    """Trajectory-averaged periodogram of exp(i phi(t)) and a Lorentzian fit.

    ``fit_span`` is the half-width of the fitted band in units of ell.
    """
    ell = spec.linewidth
    if ell <= 0:
        raise ValueError("lineshape needs a positive linewidth")
    T = 100.0 / ell if T is None else T
    dt = 0.02 / ell if dt is None else dt
    steps = int(round(T / dt))
    omega = 2 * np.pi * np.fft.fftfreq(steps, dt)
    acc = np.zeros(steps)
    ss = np.random.SeedSequence(seed).spawn((n_paths + batch - 1) // batch)
    done = 0
    for child in ss:
        k = min(batch, n_paths - done)
        rng = np.random.default_rng(child)
        inc = np.sqrt(ell * dt) * rng.standard_normal((k, steps))
        field_ = np.exp(1j * np.cumsum(inc, axis=1))
        # e^{-i omega t} convention: numpy's forward FFT
        spec_k = np.abs(np.fft.fft(field_, axis=1) * dt) ** 2 / T
        acc += spec_k.sum(axis=0)
        done += k
    power = acc / n_paths
    order = np.argsort(omega)
    omega, power = omega[order], power[order]
    band = np.abs(omega) <= fit_span * ell
    p0 = [power[band].max(), 0.0, ell / 2, 0.0]
    popt, _ = optimize.curve_fit(lorentzian, omega[band], power[band], p0=p0)
    return Lineshape(omega, power, fwhm=float(2 * abs(popt[2])), center=float(popt[1]))


@dataclass
class TrackerRun:
    seed: object
    dt: float
    T: float
    burn_in: float
    mode: str
    gain: float
    mse: float
    stderr: float
    per_trajectory: np.ndarray = field(repr=False)
    excluded: int = 0
    n_trajectories: int = 0
    # (n_traj, n_parties, steps + 1) paths when recorded
    phase: np.ndarray | None = field(default=None, repr=False)
    estimate: np.ndarray | None = field(default=None, repr=False)
    lo_phase: np.ndarray | None = field(default=None, repr=False)
    phase_noise: np.ndarray | None = field(default=None, repr=False)
    meas_noise: np.ndarray | None = field(default=None, repr=False)
    party_errors: np.ndarray | None = field(default=None, repr=False)
    # plain ensemble average when ``mse`` carries the control-variate estimate
    raw_mse: float | None = None
    raw_stderr: float | None = None

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / max(self.n_trajectories, 1)

    @property
    def lock_ok(self) -> bool:
        return self.excluded_fraction < MAX_EXCLUDED_FRACTION

    def as_record(self, spec: BeamSpec) -> dict:
        return {
            "mode": self.mode, "N": spec.N, "p": spec.flux, "ell": spec.linewidth, "chi": self.gain,
            "mse": self.mse, "stderr": self.stderr, "excluded": self.excluded,
            "trajectories": self.n_trajectories, "dt": self.dt, "T": self.T,
        }


def linear_mse(spec: BeamSpec, gain: float, mode: str = "adaptive") -> float:
    """Stationary error variance of the linearised tracking loop."""
    amp = np.sqrt(spec.flux) if mode == "adaptive" else np.sqrt(spec.flux / 2)
    return (spec.linewidth + gain**2) / (4 * gain * amp)


def filter_time_constant(spec: BeamSpec, gain: float, mode: str = "adaptive") -> float:
    """Relaxation time of the linearised tracking error, 1 / (2 chi sqrt(p_arm))."""
    amp = np.sqrt(spec.flux) if mode == "adaptive" else np.sqrt(spec.flux / 2)
    return 1.0 / (2 * gain * amp)


def default_step(spec: BeamSpec, gain: float, mode: str = "adaptive") -> float:
    scales = [filter_time_constant(spec, gain, mode)]
    if spec.linewidth > 0:
        scales += [1 / spec.linewidth, 1 / (4 * np.sqrt(spec.flux * spec.linewidth))]
    return 1e-2 * min(scales)


def _track(spec: BeamSpec, gain: float | None, mode: str, dt: float | None, T: float | None,
           seed, n_traj: int, n_parties: int = 1, burn_in: float | None = None,
           window: float = 100.0, record: bool = False,
           party_covariance: bool = False, control_variate: bool = False) -> TrackerRun:
    if mode not in ("adaptive", "nonadaptive"):
        raise ValueError(f"unknown tracking mode {mode!r}")
    if gain is None:
        if spec.linewidth == 0:
            raise ValueError("no optimal gain for a beam without phase diffusion; pass gain")
        gain = np.sqrt(spec.linewidth)
    tau = filter_time_constant(spec, gain, mode)
    dt = default_step(spec, gain, mode) if dt is None else dt
    burn_in = 10 * tau if burn_in is None else burn_in
    if burn_in < 10 * tau * (1 - 1e-12):
        raise ValueError("burn-in must cover at least 10 filter time constants")
    T = burn_in + window * tau if T is None else T
    steps = int(round(T / dt))
    burn_steps = int(round(burn_in / dt))
    if steps <= burn_steps:
        raise ValueError("horizon T must exceed the burn-in")
    # running fraction of time spent with |error| > pi/2, averaged over the lock window
    lock_rate = min(1.0, dt / (LOCK_LOSS_WINDOW * tau))

    phase_rng, meas_rng = _streams(seed, 2)
    shape = (n_traj, n_parties)
    phi = np.zeros((n_traj, 1))
    est = np.zeros(shape)
    sq_sum = np.zeros(shape)
    lin = np.zeros(shape)
    lin_sq_sum = np.zeros(shape)
    cross = np.zeros((n_traj, n_parties, n_parties)) if party_covariance else None
    unlocked = np.zeros(shape)
    lost = np.zeros(n_traj, dtype=bool)
    sqrt_ell_dt = np.sqrt(spec.linewidth * dt)
    sqrt_dt = np.sqrt(dt)

    if record:
        hist = {k: np.empty((n_traj, n_parties, steps + 1)) for k in ("phase", "estimate", "lo")}
        hist["phase_noise"] = np.empty((n_traj, 1, steps))
        hist["meas_noise"] = np.empty((n_traj, n_parties, steps, 1 if mode == "adaptive" else 2))
        hist["phase"][..., 0] = phi
        hist["estimate"][..., 0] = est
        hist["lo"][..., 0] = est if mode == "adaptive" else 0.0

    if mode == "adaptive":
        amp = 2 * np.sqrt(spec.flux)
    else:
        amp = 2 * np.sqrt(spec.flux / 2)
    decay = gain * amp * dt

    for k in range(steps):
        xi = phase_rng.standard_normal((n_traj, 1))
        if mode == "adaptive":
            dW = sqrt_dt * meas_rng.standard_normal(shape)
            # LO locked to the estimate: the record carries only the phase error
            dy = amp * np.sin(phi - est) * dt + dW
            est = est + gain * dy
            meas = dW
        else:
            dW = sqrt_dt * meas_rng.standard_normal(shape + (2,))
            dy1 = amp * np.sin(phi) * dt + dW[..., 0]
            dy2 = amp * np.sin(phi - np.pi / 2) * dt + dW[..., 1]
            # rotate the two quadrature records onto the current estimate
            c, s_ = np.cos(est), np.sin(est)
            err_signal = c * dy1 + s_ * dy2
            est = est + gain * err_signal
            meas = c * dW[..., 0] + s_ * dW[..., 1]
        phi = phi + sqrt_ell_dt * xi
        err = wrap_phase(phi - est)
        if control_variate:
            lin = (1 - decay) * lin + sqrt_ell_dt * xi - gain * meas
        if record:
            hist["phase"][..., k + 1] = phi
            hist["estimate"][..., k + 1] = est
            hist["lo"][..., k + 1] = est if mode == "adaptive" else 0.0
            hist["phase_noise"][..., k] = sqrt_ell_dt * xi
            hist["meas_noise"][..., k, :] = dW.reshape(shape + (-1,))
        unlocked += lock_rate * ((np.abs(err) > np.pi / 2) - unlocked)
        lost |= np.any(unlocked > 0.5, axis=1)
        if k + 1 > burn_steps:
            sq_sum += err * err
            if control_variate:
                lin_sq_sum += lin * lin
            if party_covariance:
                cross += err[:, :, None] * err[:, None, :]

    n_avg = steps - burn_steps
    per_traj = (sq_sum / n_avg).mean(axis=1)
    keep = ~lost
    mse, stderr = _mean_se(per_traj[keep])
    raw_mse = raw_stderr = None
    if control_variate:
        raw_mse, raw_stderr = mse, stderr
        shadow = (lin_sq_sum / n_avg).mean(axis=1)
        expected = _linear_window_mean(1 - decay, (spec.linewidth + gain**2) * dt, burn_steps, steps)
        mse, stderr = _mean_se((per_traj - shadow)[keep] + expected)
    run = TrackerRun(
        seed=seed, dt=dt, T=steps * dt, burn_in=burn_steps * dt, mode=mode, gain=float(gain),
        mse=mse, stderr=stderr, per_trajectory=per_traj, excluded=int(lost.sum()),
        n_trajectories=n_traj, party_errors=cross[keep] / n_avg if party_covariance else None,
        raw_mse=raw_mse, raw_stderr=raw_stderr,
    )
    if record:
        run.phase = wrap_phase(hist["phase"])
        run.estimate = wrap_phase(hist["estimate"])
        run.lo_phase = wrap_phase(hist["lo"])
        run.phase_noise = hist["phase_noise"]
        run.meas_noise = hist["meas_noise"]
    return run


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
    return float(x.mean()), se


def _linear_window_mean(r: float, q: float, burn_steps: int, steps: int) -> float:
    """Exact mean of e_k^2 over k = burn+1..steps for e_{k+1} = r e_k + N(0, q), e_0 = 0."""
    k = np.arange(burn_steps + 1, steps + 1)
    return float(np.mean(q * (1 - r ** (2 * k)) / (1 - r * r)))


def adaptive_track(spec: BeamSpec, gain: float | None = None, dt: float | None = None, T: float | None = None,
                   seed=0, n_traj: int = 1000, **kw) -> TrackerRun:
    """Adaptive homodyne tracking; ``gain`` defaults to the optimum sqrt(ell)."""
    return _track(spec, gain, "adaptive", dt, T, seed, n_traj, **kw)


def nonadaptive_track(spec: BeamSpec, gain: float | None = None, dt: float | None = None, T: float | None = None,
                      seed=0, n_traj: int = 1000, **kw) -> TrackerRun:
    """Dual-homodyne tracking with fixed orthogonal local oscillators."""
    return _track(spec, gain, "nonadaptive", dt, T, seed, n_traj, **kw)


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    residual: float


def scaling_fit(N_values, mse_values) -> ScalingFit:
    """Least-squares line through (log N, log MSE)."""
    x = np.log(np.asarray(N_values, dtype=float))
    y = np.log(np.asarray(mse_values, dtype=float))
    if x.size < 3:
        raise ValueError("need at least three N values")
    if np.log10(np.exp(x.max() - x.min())) < 2 - 1e-9:
        raise ValueError("N grid must span at least two decades")
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ScalingFit(float(slope), float(np.exp(intercept)), resid)
