import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal as sps

import oracles
from granular_id import dsp

FS = 500.0


@pytest.fixture(scope="module")
def hp():
    return dsp.design_butterworth_highpass(8, 23.0, FS)


def test_highpass_structure(hp):
    assert len(hp.sections) == 4
    assert hp.overall_gain == 1.0
    assert all(s.is_stable() for s in hp.sections)
    a2 = [s.a2 for s in hp.sections]
    assert a2 == sorted(a2)
    for s in hp.sections:
        assert s.b1 == pytest.approx(-2 * s.b0) and s.b2 == pytest.approx(s.b0)


def test_highpass_cutoff_dc_nyquist(hp):
    assert abs(dsp.frequency_response(hp, 23.0)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert abs(dsp.frequency_response(hp, 0.0)) == pytest.approx(0.0, abs=1e-12)
    assert abs(dsp.frequency_response(hp, 250.0)) == pytest.approx(1.0, abs=1e-12)
    assert 20 * math.log10(abs(dsp.frequency_response(hp, 2.3))) <= -150


def test_highpass_matches_closed_form(hp):
    f = np.geomspace(0.5, 249.0, 200)
    got = np.abs(dsp.frequency_response(hp, f))
    want = oracles.butterworth_highpass_magnitude(f, 8, 23.0, FS)
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-14)


def test_highpass_matches_scipy_design(hp):
    sos = sps.butter(8, 23.0, btype="highpass", fs=FS, output="sos")
    f = np.linspace(0.0, 250.0, 301)
    _, h_ref = sps.sosfreqz(sos, worN=f, fs=FS)
    np.testing.assert_allclose(np.abs(dsp.frequency_response(hp, f)), np.abs(h_ref), atol=1e-10)
    ref_poles = np.sort_complex(np.concatenate([np.roots([1, *s[4:]]) for s in sos]))
    ours = np.sort_complex(np.concatenate([s.poles() for s in hp.sections]))
    np.testing.assert_allclose(ours, ref_poles, atol=1e-10)


def test_lowpass_closed_form():
    lp = dsp.design_butterworth_lowpass(6, 80.0, FS)
    f = np.linspace(0.0, 249.0, 100)
    w = np.tan(np.pi * f / FS) / math.tan(math.pi * 80.0 / FS)
    np.testing.assert_allclose(np.abs(dsp.frequency_response(lp, f)), 1 / np.sqrt(1 + w ** 12), rtol=1e-9, atol=1e-13)


@pytest.mark.parametrize("order,cutoff", [(7, 23.0), (0, 23.0), (8, 250.0), (8, 0.0), (8, 300.0)])
def test_design_rejects_bad_parameters(order, cutoff):
    with pytest.raises(ValueError):
        dsp.design_butterworth_highpass(order, cutoff, FS)


@settings(max_examples=40, deadline=None)
@given(order=st.sampled_from([2, 4, 6, 8, 10]), frac=st.floats(0.01, 0.45))
def test_highpass_half_power_and_stability(order, frac):
    fc = frac * FS
    c = dsp.design_butterworth_highpass(order, fc, FS)
    assert all(s.is_stable() for s in c.sections)
    assert abs(dsp.frequency_response(c, fc)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def _amplitude(y, freq):
    t = np.arange(y.size) / FS
    A = np.column_stack([np.sin(2 * np.pi * freq * t), np.cos(2 * np.pi * freq * t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.hypot(*coef))


@pytest.mark.parametrize("freq", [5.0, 23.0, 50.0, 120.0])
def test_sine_steady_state_amplitude(hp, freq):
    t = np.arange(4000) / FS
    y = dsp.filter_forward(hp, np.sin(2 * np.pi * freq * t))
    expected = oracles.butterworth_highpass_magnitude(freq, 8, 23.0, FS)
    assert _amplitude(y[2000:], freq) == pytest.approx(expected, rel=1e-4, abs=1e-9)


def test_filter_matches_scipy_sosfilt(hp):
    x = np.random.default_rng(3).normal(size=(3, 700))
    sos = np.column_stack([hp.coefficients()[:, :3], np.ones(len(hp.sections)), hp.coefficients()[:, 3:]])
    np.testing.assert_allclose(dsp.filter_forward(hp, x), sps.sosfilt(sos, x, axis=-1), atol=1e-12)


def test_filter_linear_and_time_invariant(hp):
    rng = np.random.default_rng(0)
    x1, x2 = rng.normal(size=(2, 500))
    np.testing.assert_allclose(
        dsp.filter_forward(hp, 2 * x1 - 3 * x2), 2 * dsp.filter_forward(hp, x1) - 3 * dsp.filter_forward(hp, x2), atol=1e-12
    )
    shifted = np.concatenate([np.zeros(37), x1])
    np.testing.assert_allclose(dsp.filter_forward(hp, shifted)[37:], dsp.filter_forward(hp, x1), atol=1e-12)


def test_zero_phase_has_squared_magnitude(hp):
    t = np.arange(6000) / FS
    y = dsp.filter_zero_phase(hp, np.sin(2 * np.pi * 30.0 * t))
    expected = oracles.butterworth_highpass_magnitude(30.0, 8, 23.0, FS) ** 2
    assert _amplitude(y[2000:4000], 30.0) == pytest.approx(expected, rel=1e-4)


def test_filter_preserves_shape(hp):
    x = np.zeros((2, 6, 50))
    assert dsp.filter_forward(hp, x).shape == x.shape


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 2**31))
def test_fft_matches_direct_dft(n, seed):
    x = np.random.default_rng(seed).normal(size=n) + 1j * np.random.default_rng(seed + 1).normal(size=n)
    ref = oracles.direct_dft(x)
    np.testing.assert_allclose(dsp.fft(x), ref, atol=1e-8 * max(1.0, np.abs(ref).max()))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 512), seed=st.integers(0, 2**31))
def test_fft_inverse_and_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    X = dsp.fft(x)
    np.testing.assert_allclose(dsp.ifft(X).real, x, atol=1e-10)
    assert np.sum(np.abs(X) ** 2) / n == pytest.approx(np.sum(x * x), rel=1e-9)


def test_fft_batched_rows():
    x = np.random.default_rng(1).normal(size=(4, 3, 100))
    np.testing.assert_allclose(dsp.fft(x), np.fft.fft(x, axis=-1), atol=1e-10)


def test_dft_magnitude_pure_tone():
    n = 256
    x = np.cos(2 * np.pi * 8 * np.arange(n) / n)
    mag = dsp.dft_magnitude(x)
    assert mag.shape == (129,)
    assert mag[8] == pytest.approx(n / 2, rel=1e-12)
    assert np.delete(mag, 8).max() < 1e-9


def test_dft_magnitude_zero_padding():
    x = np.random.default_rng(2).normal(size=(6, 1600))
    mag = dsp.dft_magnitude(x, 2048)
    assert mag.shape == (6, 1025)
    np.testing.assert_allclose(mag, np.abs(np.fft.rfft(x, 2048, axis=-1)), atol=1e-9)
    with pytest.raises(ValueError):
        dsp.dft_magnitude(x, 1000)


def test_next_pow2():
    assert [dsp.next_pow2(n) for n in (1, 2, 3, 1600, 2048, 2049)] == [1, 2, 4, 2048, 2048, 4096]


@settings(max_examples=80, deadline=None)
@given(
    values=st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=300),
    n_bins=st.integers(1, 120),
)
def test_histogram_matches_naive(values, n_bins):
    h = dsp.magnitude_histogram(np.array(values), n_bins, -1.5, 1.5)
    assert h.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(h >= 0)
    ref = oracles.naive_histogram(values, n_bins, -1.5, 1.5)
    # bin edges may differ by one ulp between the two formulations
    diff = np.abs(h - ref).sum() * len(values)
    edge_hits = sum(
        1 for v in values if -1.5 <= v <= 1.5 and abs(((v + 1.5) * n_bins / 3.0) - round((v + 1.5) * n_bins / 3.0)) < 1e-9
    )
    assert diff <= 2 * edge_hits + 1e-9


def test_histogram_known_values():
    h = dsp.magnitude_histogram(np.array([-2.0, -1.5, 0.0, 0.1, 1.49, 1.5, 7.0]), 3, -1.5, 1.5)
    # bins [-1.5,-0.5) [-0.5,0.5) [0.5,1.5]; clipped outliers go to the edges
    np.testing.assert_allclose(h, np.array([2, 2, 3]) / 7)


def test_histogram_per_row_ranges():
    x = np.array([[0.0, 1.0, 2.0, 3.0], [10.0, 10.0, 20.0, 20.0]])
    h = dsp.magnitude_histogram(x, 2, lo=np.array([0.0, 10.0]), hi=np.array([3.0, 20.0]))
    np.testing.assert_allclose(h, [[0.5, 0.5], [0.5, 0.5]])


def test_minmax_normalize():
    out = dsp.minmax_normalize(np.array([[1.0, 3.0, 2.0], [4.0, 4.0, 4.0]]))
    np.testing.assert_allclose(out, [[0.0, 1.0, 0.5], [0.0, 0.0, 0.0]])


def test_identity_cascade_response():
    ident = dsp.FilterCascade((dsp.BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0),), 1.0, {"sample_rate_hz": FS})
    assert dsp.frequency_response(ident, 37.0) == pytest.approx(1 + 0j)


def test_filter_zero_and_constant_inputs(hp):
    np.testing.assert_array_equal(dsp.filter_forward(hp, np.zeros(1600)), np.zeros(1600))
    c = -3.7
    y = dsp.filter_forward(hp, np.full(1600, c))
    assert np.max(np.abs(y[-100:])) <= 1e-9 * abs(c)


def test_designed_poles_have_margin(hp):
    for order in (2, 4, 8, 12):
        c = dsp.design_butterworth_highpass(order, 23.0, FS)
        assert all(s.is_stable(margin=1e-9) for s in c.sections)


def test_highpass_magnitude_monotone(hp):
    mag = np.abs(dsp.frequency_response(hp, np.linspace(0.0, 250.0, 500)))
    assert np.all(np.diff(mag) >= -1e-15)


def test_dft_magnitude_unpadded_1600_tone():
    n = 1600
    mag = dsp.dft_magnitude(np.cos(2 * np.pi * 8 * np.arange(n) / n))
    assert mag.shape == (801,)
    assert mag[8] == pytest.approx(800.0, rel=1e-12)
    assert np.delete(mag, 8).max() <= 1e-6
    np.testing.assert_array_equal(dsp.dft_magnitude(np.zeros(n)), np.zeros(801))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 256), seed=st.integers(0, 2**31))
def test_dft_parseval_one_sided(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    X = np.abs(oracles.direct_dft(x))
    mag = dsp.dft_magnitude(x)
    np.testing.assert_allclose(mag, X[: n // 2 + 1], atol=1e-6)
    inner = mag[1:(n + 1) // 2]
    total = mag[0] ** 2 + 2 * np.sum(inner ** 2) + (mag[n // 2] ** 2 if n % 2 == 0 and n > 1 else 0.0)
    assert total / n == pytest.approx(np.sum(x * x), rel=1e-9)


def test_histogram_spec_examples():
    h = dsp.magnitude_histogram(np.zeros(1600))
    assert h[50] == 1.0 and h.sum() == 1.0
    h = dsp.magnitude_histogram(np.array([0.0, 2.0]))
    assert h[99] == 0.5
    x = np.random.default_rng(5).uniform(-1.5, 1.5, size=1600)
    np.testing.assert_array_equal(dsp.magnitude_histogram(x) * 1600, oracles.naive_histogram(x, 100, -1.5, 1.5) * 1600)
    with pytest.raises(ValueError):
        dsp.magnitude_histogram(np.array([]))


def test_minmax_examples():
    np.testing.assert_allclose(dsp.minmax_normalize(np.array([0.0, 5.0, 10.0])), [0, 0.5, 1])
    np.testing.assert_array_equal(dsp.minmax_normalize(np.array([3.0, 3.0, 3.0])), [0, 0, 0])
    out = dsp.minmax_normalize(np.random.default_rng(0).normal(size=77))
    assert out.min() == 0.0 and out.max() == 1.0
