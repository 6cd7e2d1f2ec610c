import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laserclock.pixel import (
    PixelBasisSpec,
    apply_channel,
    channel_phase_reference_error,
    coherent_wavefunction,
    pixel_mean_amplitude,
    pixel_overlap_coherent,
    pixel_wavefunction,
    reapply_channel,
)

SPEC = PixelBasisSpec(1.0, 1024)


def test_spec_validation():
    with pytest.raises(ValueError):
        PixelBasisSpec(0.0)
    with pytest.raises(ValueError):
        PixelBasisSpec(1.0, points_per_pixel=20)


def test_coherent_wavefunction_normalized():
    q = np.linspace(-20, 20, 40001)
    psi = coherent_wavefunction(2 - 1j, q)
    assert abs(np.trapezoid(np.abs(psi) ** 2, q) - 1) < 1e-10
    mean_q = np.trapezoid(q * np.abs(psi) ** 2, q)
    assert mean_q == pytest.approx(2 * np.sqrt(2), rel=1e-8)


def test_completeness_alpha_3():
    out = apply_channel(3, SPEC)
    assert abs(out.total - 1) < 1e-6
    assert out.probs.min() >= 0


def test_pixel_orthonormality():
    q = np.linspace(-1.5, 1.5, 300001)
    h = q[1] - q[0]
    f00 = pixel_wavefunction(0, 0, SPEC, q)
    f10 = pixel_wavefunction(1, 0, SPEC, q)
    f01 = pixel_wavefunction(0, 1, SPEC, q)
    assert np.sum(f00.conj() * f10) == 0
    # midpoint grid of one box: plane waves are orthogonal to rounding
    g = SPEC.box_grid(0)
    a = pixel_wavefunction(0, 0, SPEC, g)
    b = pixel_wavefunction(0, 1, SPEC, g)
    assert abs(np.sum(a.conj() * b) * SPEC.h) < 1e-8
    assert abs(np.sum(np.abs(a) ** 2) * SPEC.h - 1) < 1e-12
    assert abs(np.sum(np.abs(f00) ** 2) * h - 1) < 1e-3


def test_mean_amplitude_in_pixel():
    a = pixel_mean_amplitude(2, 1, SPEC)
    assert abs(a - (2 + 2j * np.pi) / np.sqrt(2)) < 1e-6


def test_overlap_matches_table():
    out = apply_channel(3, SPEC)
    i = int(np.argmax(out.probs.max(axis=1)))
    j = int(np.argmax(out.probs[i]))
    n, m = out.n_values[i], out.m_values[j]
    direct = abs(pixel_overlap_coherent(n, m, 3, SPEC)) ** 2
    assert direct == pytest.approx(out.probs[i, j], rel=1e-6)


def test_channel_output_amplitude():
    out = apply_channel(10, SPEC)
    assert abs(out.output_amplitude - 10) / 10 <= 0.05
    # frozen
    assert out.output_amplitude.real == pytest.approx(9.99999, abs=1e-4)


def test_channel_rotated_phase():
    out = apply_channel(10 * np.exp(1j * np.pi / 4), SPEC)
    assert abs(np.angle(out.output_amplitude) - np.pi / 4) < 0.05


def test_idempotent():
    out = apply_channel(3, SPEC)
    again = reapply_channel(out)
    assert np.max(np.abs(again.probs - out.probs)) < 1e-12
    assert again.output_amplitude == pytest.approx(out.output_amplitude, abs=1e-10)


def test_window_too_small_rejected():
    narrow = PixelBasisSpec(1.0, 64, q_halfwidth=1.0, padding=0.0)
    with pytest.raises(ValueError, match="widen"):
        apply_channel(3, narrow)


def test_csv_rows():
    out = apply_channel(2, PixelBasisSpec(1.0, 128))
    text = out.to_csv(min_prob=1e-3)
    lines = text.strip().splitlines()
    assert lines[0] == "n,m,q_n,p_m,probability"
    assert len(lines) > 2
    assert sum(float(r.split(",")[-1]) for r in lines[1:]) <= 1


def test_phase_reference_error_trends():
    e20 = channel_phase_reference_error(20, SPEC)
    e2 = channel_phase_reference_error(2, SPEC)
    coarse = channel_phase_reference_error(20, PixelBasisSpec(10.0, 1024))
    assert e20 < 0.02
    assert e2 > e20
    assert coarse > e20
    with pytest.raises(ValueError):
        channel_phase_reference_error(1, SPEC)


@settings(max_examples=15, deadline=None)
@given(r=st.floats(0.0, 8.0), th=st.floats(-np.pi, np.pi))
def test_channel_conserves_probability(r, th):
    out = apply_channel(r * np.exp(1j * th), PixelBasisSpec(1.0, 128))
    assert abs(out.total - 1) < 1e-6
    assert out.probs.min() >= 0
