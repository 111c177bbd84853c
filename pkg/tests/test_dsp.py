import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

import echotrace as et
from echotrace.dsp import load_urbf, save_urbf

from conftest import flat_probe

C = 1540.0
FS = 50e6
FC = 5e6


class TestPulseKernel:
    def test_zero_at_origin(self):
        p = et.pulse_kernel(FC, 5, FS)
        center = p.kernel.size // 2
        assert p.kernel[center] == 0.0

    def test_half_amplitude_envelope_at_half_duration(self):
        # 5 cycles at 5 MHz: envelope reaches 1/2 at +-0.5 us
        p = et.pulse_kernel(FC, 5, FS)
        t = 0.5e-6
        assert math.exp(-t * t / p.sigma) == pytest.approx(0.5, rel=1e-12)

    def test_odd_symmetry(self):
        p = et.pulse_kernel(FC, 5, FS)
        np.testing.assert_allclose(p.kernel, -p.kernel[::-1], atol=1e-16)

    def test_support_covers_envelope_to_1e3(self):
        p = et.pulse_kernel(FC, 5, FS)
        n_half = p.kernel.size // 2
        t_edge = n_half / FS
        assert math.exp(-t_edge * t_edge / p.sigma) <= 1e-3
        assert p.kernel.size % 2 == 1

    def test_carrier_frequency(self):
        p = et.pulse_kernel(FC, 8, FS)
        spectrum = np.abs(np.fft.rfft(p.kernel, n=4096))
        peak = np.fft.rfftfreq(4096, 1.0 / FS)[spectrum.argmax()]
        assert peak == pytest.approx(FC, rel=0.02)

    def test_nyquist_violation(self):
        with pytest.raises(ValueError):
            et.pulse_kernel(FC, 5, 9e6)
        with pytest.raises(ValueError):
            et.pulse_kernel(FC, 0.5, FS)


def channel_of(array, fs=FS, scheme=None):
    a = np.asarray(array, dtype=np.float32)
    scheme = scheme or et.PlaneWaveScheme((0.0,))
    return et.ChannelData(samples=a, fs=fs, scheme=scheme)


class TestConvolveChannels:
    def test_zero_in_zero_out(self):
        p = et.pulse_kernel(FC, 5, FS)
        ch = channel_of(np.zeros((1, 2, 500)))
        out = et.convolve_channels(ch, p)
        assert not np.any(out.samples)
        assert out.samples.shape == (1, 2, 500)

    def test_impulse_reproduces_kernel(self):
        p = et.pulse_kernel(FC, 5, FS)
        n = 801
        k = 400
        ch = channel_of(np.zeros((1, 1, n)))
        ch.samples[0, 0, k] = 1.0
        out = et.convolve_channels(ch, p)
        half = p.kernel.size // 2
        np.testing.assert_allclose(out.samples[0, 0, k - half:k + half + 1],
                                   p.kernel, atol=1e-6)

    def test_superposition_of_two_impulses(self):
        p = et.pulse_kernel(FC, 5, FS)
        ch = channel_of(np.zeros((1, 1, 1200)))
        ch.samples[0, 0, 300] = 1.0
        ch.samples[0, 0, 700] = -2.0
        out = et.convolve_channels(ch, p).samples[0, 0]
        one = channel_of(np.zeros((1, 1, 1200)))
        one.samples[0, 0, 300] = 1.0
        two = channel_of(np.zeros((1, 1, 1200)))
        two.samples[0, 0, 700] = -2.0
        sep = (et.convolve_channels(one, p).samples[0, 0]
               + et.convolve_channels(two, p).samples[0, 0])
        np.testing.assert_allclose(out, sep, atol=1e-6)

    @given(data=hnp.arrays(np.float32, (2, 2, 256),
                           elements=st.floats(-10, 10, width=32)),
           shift=st.integers(1, 40))
    @settings(max_examples=20)
    def test_shift_equivariance(self, data, shift):
        p = et.pulse_kernel(FC, 2, FS)
        base = et.convolve_channels(channel_of(data), p).samples
        rolled = np.roll(data, shift, axis=2)
        out = et.convolve_channels(channel_of(rolled), p).samples
        half = p.kernel.size // 2
        lo = shift + half
        np.testing.assert_allclose(out[..., lo:-half or None],
                                   np.roll(base, shift, axis=2)[..., lo:-half or None],
                                   atol=2e-4)

    def test_fs_mismatch_rejected(self):
        p = et.pulse_kernel(FC, 5, 40e6)
        with pytest.raises(ValueError):
            et.convolve_channels(channel_of(np.zeros((1, 1, 10))), p)


def analytic_point_rf(spec, scheme, target, num_samples, fs=FS, c=C,
                      pitch=3e-4, radius=100.0):
    """Channel data with the pulse waveform placed at the exact plane-wave
    delays of a point target, built from the layout definition only."""
    n_el = spec.num_elements
    aperture = (n_el - 1) * pitch
    opening = aperture / radius
    e = np.arange(n_el)
    phi = opening * (e / (n_el - 1) - 0.5)
    ex = radius * np.sin(phi)
    ez = radius * (np.cos(phi) - 1.0)
    sigma = (5 / (2.0 * FC)) ** 2 / math.log(2.0)
    ts = np.arange(num_samples) / fs
    data = np.zeros((len(scheme.angles), n_el, num_samples),
                    dtype=np.float32)
    x0, z0 = target
    for a, th in enumerate(scheme.angles):
        proj = ex * math.sin(th) + ez * math.cos(th)
        tx = (x0 * math.sin(th) + z0 * math.cos(th) - proj.min()) / c
        for k in range(n_el):
            rx = math.hypot(x0 - ex[k], z0 - ez[k]) / c
            dt = ts - (tx + rx)
            data[a, k] = (np.sin(2.0 * math.pi * FC * dt)
                          * np.exp(-dt * dt / sigma))
    return et.ChannelData(samples=data, fs=fs, scheme=scheme)


class TestBeamformer:
    def test_zero_rf_zero_image(self):
        spec = flat_probe(num_elements=16)
        scheme = et.PlaneWaveScheme((0.0,))
        grid = et.BeamformGrid(-0.005, 0.005, 0.025, 0.035, 2e-4)
        rf = channel_of(np.zeros((1, 16, 4000)))
        out = et.das_beamform(rf, spec, scheme, grid, C)
        assert out.shape == grid.shape
        assert not np.any(out)

    def test_point_target_focuses_at_true_position(self):
        spec = flat_probe(num_elements=64)
        scheme = et.PlaneWaveScheme((0.0,))
        rf = analytic_point_rf(spec, scheme, (0.0, 0.030), 3000)
        grid = et.BeamformGrid(-0.004, 0.004, 0.026, 0.034, 5e-5)
        out = et.das_beamform(rf, spec, scheme, grid, C)
        env = et.envelope(out)
        iz, ix = np.unravel_index(env.argmax(), env.shape)
        assert abs(grid.xs[ix] - 0.0) <= 0.5 * grid.pixel_pitch
        assert abs(grid.zs[iz] - 0.030) <= 0.5 * grid.pixel_pitch

    def test_compounding_narrows_main_lobe(self):
        spec = flat_probe(num_elements=64)
        single = et.PlaneWaveScheme((0.0,))
        compound = et.PlaneWaveScheme(tuple(
            math.radians(a) for a in np.linspace(-30, 30, 25)))
        grid = et.BeamformGrid(-0.006, 0.006, 0.027, 0.033, 5e-5)

        def lobe_width(scheme):
            rf = analytic_point_rf(spec, scheme, (0.0, 0.030), 3000)
            env = et.envelope(et.das_beamform(rf, spec, scheme, grid, C))
            row = env[env.max(axis=1).argmax()]
            return int((row >= 0.5 * row.max()).sum())

        assert lobe_width(compound) <= lobe_width(single)

    def test_out_of_range_pixels_zero_and_counted(self):
        spec = flat_probe(num_elements=8)
        scheme = et.PlaneWaveScheme((0.0,))
        rf = channel_of(np.ones((1, 8, 100)))  # only 2 us of data
        grid = et.BeamformGrid(-0.002, 0.002, 0.05, 0.06, 5e-4)
        stats = {}
        out = et.das_beamform(rf, spec, scheme, grid, C, stats=stats)
        assert not np.any(out)
        assert stats["out_of_range_samples"] == out.size * 8

    def test_thread_count_invariant(self):
        spec = flat_probe(num_elements=16)
        scheme = et.PlaneWaveScheme((0.0,))
        rf = analytic_point_rf(spec, scheme, (0.001, 0.030), 2500)
        grid = et.BeamformGrid(-0.004, 0.004, 0.026, 0.034, 1e-4)
        a = et.das_beamform(rf, spec, scheme, grid, C, threads=1)
        b = et.das_beamform(rf, spec, scheme, grid, C, threads=2)
        assert np.array_equal(a, b)

    def test_dimension_checks(self):
        spec = flat_probe(num_elements=8)
        scheme = et.PlaneWaveScheme((0.0,))
        grid = et.BeamformGrid(-0.002, 0.002, 0.02, 0.03, 5e-4)
        with pytest.raises(ValueError):
            et.das_beamform(channel_of(np.zeros((2, 8, 100))), spec,
                            scheme, grid, C)
        with pytest.raises(ValueError):
            et.das_beamform(channel_of(np.zeros((1, 4, 100))), spec,
                            scheme, grid, C)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            et.BeamformGrid(0.01, -0.01, 0.0, 0.05, 1e-4)
        with pytest.raises(ValueError):
            et.BeamformGrid(-0.01, 0.01, 0.0, 0.05, 0.0)


class TestEnvelope:
    def test_tone_column_flat_envelope(self):
        n = 2048
        t = np.arange(n)
        col = np.sin(2.0 * math.pi * 0.1 * t) * 3.0
        env = et.envelope(col[:, None])[:, 0]
        interior = env[200:-200]
        np.testing.assert_allclose(interior, 3.0, rtol=0.02)

    def test_zero_in_zero_out(self):
        assert not np.any(et.envelope(np.zeros((64, 4))))

    def test_pulse_envelope_peak_matches_gaussian(self):
        p = et.pulse_kernel(FC, 5, FS)
        n = 2001
        col = np.zeros(n)
        k = p.kernel.size
        col[(n - k) // 2:(n - k) // 2 + k] = p.kernel
        env = et.envelope(col[:, None])[:, 0]
        assert env.max() == pytest.approx(1.0, rel=0.03)

    def test_envelope_dominates_signal(self):
        rng = np.random.default_rng(1)
        sig = rng.normal(size=(512, 3))
        from scipy.signal import fftconvolve
        k = et.pulse_kernel(FC, 3, FS).kernel
        sig = fftconvolve(sig, k[:, None], mode="same", axes=0)
        env = et.envelope(sig)
        tol = 0.02 * np.abs(sig).max()
        assert np.all(env >= np.abs(sig) - tol)


class TestLogCompress:
    def test_peak_is_zero_db(self):
        env = np.array([[1.0, 2.0], [4.0, 0.5]])
        img = et.log_compress(env, 90.0)
        assert img.values_db.max() == 0.0
        assert img.values_db[1, 0] == 0.0

    def test_half_is_minus_six_db(self):
        env = np.array([[1.0, 0.5]])
        img = et.log_compress(env, 90.0)
        assert img.values_db[0, 1] == pytest.approx(-6.0206, abs=1e-4)

    def test_floor_clipped_exactly(self):
        env = np.array([[1.0, 1e-9, 0.0]])
        img = et.log_compress(env, 90.0)
        assert img.values_db[0, 1] == -90.0
        assert img.values_db[0, 2] == -90.0

    def test_monotone(self):
        rng = np.random.default_rng(2)
        env = rng.uniform(0.0, 5.0, size=(40, 40))
        v = et.log_compress(env, 60.0).values_db
        order = np.argsort(env.ravel())
        assert np.all(np.diff(v.ravel()[order]) >= -1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            et.log_compress(np.zeros((4, 4)), 90.0)
        with pytest.raises(ValueError):
            et.log_compress(np.ones((2, 2)), -5.0)


class TestImageExport:
    def test_quantization_rules(self, tmp_path):
        grid = et.BeamformGrid(0.0, 1e-3, 0.0, 1e-3, 1e-3)
        v = np.array([[0.0, -90.0], [-45.0, -30.0]])
        img = et.BModeImage(values_db=v, dynamic_range_db=90.0, grid=grid)
        path = tmp_path / "img.pgm"
        et.export_image(img, path)
        back = et.load_pgm(path)
        assert back[0, 0] == 255
        assert back[0, 1] == 0
        assert back[1, 0] == 128  # half scale rounds away from zero
        assert back[1, 1] == round(255 * 60 / 90)

    def test_p5_header(self, tmp_path):
        v = np.zeros((3, 5))
        img = et.BModeImage(values_db=v, dynamic_range_db=90.0)
        path = tmp_path / "img.pgm"
        et.export_image(img, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n5 3\n255\n")
        assert len(raw) == len(b"P5\n5 3\n255\n") + 15

    def test_round_trip_values(self, tmp_path):
        rng = np.random.default_rng(3)
        v = rng.uniform(-90.0, 0.0, size=(16, 8))
        img = et.BModeImage(values_db=v, dynamic_range_db=90.0)
        path = tmp_path / "rt.pgm"
        et.export_image(img, path)
        back = et.load_pgm(path)
        assert back.shape == (16, 8)
        expect = np.floor(255.0 * (v + 90.0) / 90.0 + 0.5).astype(np.uint8)
        assert np.array_equal(back, expect)


class TestURBF:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        arr = rng.normal(size=(20, 30)).astype(np.float32).astype(
            np.float64)
        path = tmp_path / "b.urbf"
        save_urbf(arr, 5e-5, path)
        back, pitch = load_urbf(path)
        assert pitch == 5e-5
        assert back.shape == (20, 30)
        np.testing.assert_array_equal(back, arr)

    def test_magic_guard(self, tmp_path):
        path = tmp_path / "x.urbf"
        path.write_bytes(b"XXXX" + b"\x00" * 40)
        with pytest.raises(ValueError):
            load_urbf(path)
