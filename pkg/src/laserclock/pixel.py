"""Phase-space pixel states and the channel that fully decoheres in their basis.

A pixel state |q_n, p_m> is a plane wave of momentum p_m = 2 pi m / Delta
restricted to the position box of width Delta centred on q_n = Delta n.
The plane wave is taken as exp(+i q p_m) so that the state's momentum mean
is +p_m under p = -i d/dq.

Everything lives on a position grid: inside one box, the pixel states with
K grid points per box are exactly the K discrete Fourier modes, so the
pixel decomposition of a sampled wavefunction is one FFT per box.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .fock import wrap_phase

PLANE_WAVE_SIGN = +1
MAX_EXCLUDED = 1e-6


@dataclass(frozen=True)
class PixelBasisSpec:
    delta: float = 1.0
    points_per_pixel: int = 1024
    # half-width, in quadrature units, of the box window about the input's q mean
    q_halfwidth: float = 8.0
    padding: float = 6.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("pixel width delta must be positive")
        if self.points_per_pixel < 50:
            raise ValueError("grid resolution must be at least delta/50")

    @property
    def h(self) -> float:
        return self.delta / self.points_per_pixel

    def q_center(self, n):
        return self.delta * np.asarray(n)

    def p_center(self, m):
        return 2 * np.pi * np.asarray(m) / self.delta

    def box_indices(self, q_mean: float) -> np.ndarray:
        reach = self.q_halfwidth + self.padding
        lo = int(np.floor((q_mean - reach) / self.delta))
        hi = int(np.ceil((q_mean + reach) / self.delta))
        return np.arange(lo, hi + 1)

    def mode_indices(self, p_mean: float) -> np.ndarray:
        # K consecutive Fourier modes centred on the input's momentum
        K = self.points_per_pixel
        m0 = int(np.round(p_mean * self.delta / (2 * np.pi)))
        return m0 + np.arange(-(K // 2), K - K // 2)

    def box_grid(self, n: int) -> np.ndarray:
        """Midpoint grid of the box around q_n."""
        K = self.points_per_pixel
        return self.delta * n - 0.5 * self.delta + (np.arange(K) + 0.5) * self.h


def coherent_wavefunction(alpha: complex, q) -> np.ndarray:
    """Position wavefunction of |alpha> with q = (a + a^+)/sqrt(2)."""
    a = complex(alpha)
    q = np.asarray(q, dtype=float)
    return np.pi**-0.25 * np.exp(
        -0.5 * (q - np.sqrt(2) * a.real) ** 2 + 1j * np.sqrt(2) * a.imag * q - 1j * a.real * a.imag
    )


def pixel_wavefunction(n: int, m: int, spec: PixelBasisSpec, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    qn = spec.q_center(n)
    inside = (q >= qn - spec.delta / 2) & (q < qn + spec.delta / 2)
    return inside * spec.delta**-0.5 * np.exp(PLANE_WAVE_SIGN * 1j * q * spec.p_center(m))


def pixel_overlap_coherent(n: int, m: int, alpha: complex, spec: PixelBasisSpec,
                           rtol: float = 1e-8, max_nodes: int = 1 << 16) -> complex:
    """<q_n, p_m|alpha> by Gauss-Legendre quadrature over the box, refined until converged."""
    lo = spec.q_center(n) - spec.delta / 2
    half = spec.delta / 2
    pm = spec.p_center(m)
    # start above the number of oscillations across the box
    nodes = max(32, 2 * abs(int(m)) + 32)
    prev = None
    while nodes <= max_nodes:
        x, w = np.polynomial.legendre.leggauss(nodes)
        q = lo + half * (x + 1)
        f = np.exp(-PLANE_WAVE_SIGN * 1j * q * pm) * coherent_wavefunction(alpha, q)
        val = complex(spec.delta**-0.5 * half * np.sum(w * f))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300) + 1e-300:
            return val
        if prev is not None and abs(val) < 1e-15 and abs(prev) < 1e-15:
            return val
        prev = val
        nodes *= 2
    raise RuntimeError(f"pixel overlap ({n}, {m}) did not converge to rtol={rtol}")


def pixel_mean_amplitude(n: int, m: int, spec: PixelBasisSpec) -> complex:
    """<q_n, p_m| a |q_n, p_m> evaluated on the position grid.

    <p> is the principal value: the derivative is taken with a fourth-order
    central stencil at interior points only, so the edge discontinuities of
    the box do not enter.
    """
    q = spec.box_grid(n)
    psi = pixel_wavefunction(n, m, spec, q)
    h = spec.h
    weight = np.abs(psi) ** 2
    q_mean = np.sum(q * weight) / np.sum(weight)
    d = (-psi[4:] + 8 * psi[3:-1] - 8 * psi[1:-3] + psi[:-4]) / (12 * h)
    inner = psi[2:-2]
    p_mean = np.real(np.sum(inner.conj() * (-1j) * d)) / np.sum(np.abs(inner) ** 2)
    return complex(q_mean, p_mean) / np.sqrt(2)


@dataclass
class ChannelOutput:
    n_values: np.ndarray
    m_values: np.ndarray
    probs: np.ndarray  # probs[i, j] = P(n_values[i], m_values[j])
    output_amplitude: complex
    input_amplitude: complex
    excluded: float
    spec: PixelBasisSpec = field(repr=False)

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def to_csv(self, min_prob: float = 0.0) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "q_n", "p_m", "probability"])
        for i, n in enumerate(self.n_values):
            for j, m in enumerate(self.m_values):
                pr = self.probs[i, j]
                if pr > min_prob:
                    w.writerow([int(n), int(m), f"{self.spec.q_center(n):.17g}",
                                f"{self.spec.p_center(m):.17g}", f"{pr:.17g}"])
        return buf.getvalue()


def _box_coefficients(psi_box: np.ndarray, n: int, modes: np.ndarray, spec: PixelBasisSpec) -> np.ndarray:
    """<q_n, p_m|psi> for all ``modes`` from samples of psi on the box grid."""
    K = spec.points_per_pixel
    q0 = spec.box_grid(n)[0]
    if PLANE_WAVE_SIGN > 0:
        F = np.fft.fft(psi_box, axis=-1)
    else:
        F = np.fft.ifft(psi_box, axis=-1) * K
    # mode m aliases onto FFT bin m mod K
    coeff = F[..., np.mod(modes, K)]
    return spec.delta**-0.5 * spec.h * np.exp(-PLANE_WAVE_SIGN * 1j * spec.p_center(modes) * q0) * coeff


def _mean_amplitude(n_values, m_values, probs, spec) -> complex:
    qn = spec.q_center(n_values)
    pm = spec.p_center(m_values)
    q_mean = np.sum(probs.sum(axis=1) * qn)
    p_mean = np.sum(probs.sum(axis=0) * pm)
    return complex(q_mean, p_mean) / np.sqrt(2)


def apply_channel(alpha: complex, spec: PixelBasisSpec, max_excluded: float = MAX_EXCLUDED) -> ChannelOutput:
    """Decohere |alpha> in the pixel basis: P(n, m) = |<q_n, p_m|alpha>|^2."""
    alpha = complex(alpha)
    q0, p0 = np.sqrt(2) * alpha.real, np.sqrt(2) * alpha.imag
    n_values = spec.box_indices(q0)
    m_values = spec.mode_indices(p0)
    probs = np.empty((len(n_values), len(m_values)))
    for i, n in enumerate(n_values):
        psi = coherent_wavefunction(alpha, spec.box_grid(n))
        probs[i] = np.abs(_box_coefficients(psi, n, m_values, spec)) ** 2
    excluded = max(0.0, 1.0 - float(probs.sum()))
    if excluded > max_excluded:
        raise ValueError(f"index windows exclude probability {excluded:.3g}; widen them")
    return ChannelOutput(
        n_values, m_values, probs, _mean_amplitude(n_values, m_values, probs, spec), alpha, excluded, spec
    )


def reapply_channel(out: ChannelOutput) -> ChannelOutput:
    """Apply the channel again to a pixel-diagonal output.

    Each pixel state in the mixture is sampled on the grid and decomposed
    again; the new table is sum_k P_k |<n', m'|k>|^2.
    """
    spec = out.spec
    probs = np.zeros_like(out.probs)
    for i, n in enumerate(out.n_values):
        q = spec.box_grid(n)
        # rows: pixel states of this box sampled on the grid
        states = pixel_wavefunction(n, out.m_values[:, None], spec, q[None, :])
        overlaps = _box_coefficients(states, n, out.m_values, spec)
        probs[i] = out.probs[i] @ (np.abs(overlaps) ** 2)
    return ChannelOutput(
        out.n_values, out.m_values, probs,
        _mean_amplitude(out.n_values, out.m_values, probs, spec),
        out.input_amplitude, max(0.0, 1.0 - float(probs.sum())), spec,
    )


def channel_phase_reference_error(amplitude: float, spec: PixelBasisSpec, n_phases: int = 16) -> float:
    """RMS of wrapped (arg output - input phase) over a uniform sweep of input phases."""
    if amplitude < 2:
        raise ValueError("phase-reference sweep needs |alpha| >= 2")
    phases = 2 * np.pi * np.arange(n_phases) / n_phases
    errs = []
    for th in phases:
        out = apply_channel(amplitude * np.exp(1j * th), spec)
        errs.append(wrap_phase(np.angle(out.output_amplitude) - th))
    return float(np.sqrt(np.mean(np.square(errs))))
