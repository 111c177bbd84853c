import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import echotrace as et
from echotrace import _kernels
from echotrace.acoustics import TIR, Branch

from conftest import BONE, WATER
from oracles import ggx_cosine_mass_stratified, random_unit_vectors

Z_UP = np.array([0.0, 0.0, 1.0])
DOWN = np.array([0.0, 0.0, -1.0])


def oblique(theta_deg, phi_deg=0.0):
    """Unit direction heading downward, theta from the -z axis."""
    t = math.radians(theta_deg)
    p = math.radians(phi_deg)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p),
                     -math.cos(t)])


def up_hit():
    """Interface at the origin with its oriented normal along +z; incident
    rays head downward (negative z). Water above, bone below."""
    hit = et.Hit(position=np.zeros(3), geometric_normal=Z_UP.copy(),
                 distance_t=0.05, material_inside=BONE,
                 material_outside=WATER, front_face=True)
    return (1.54, 7.8), hit


class TestSnell:
    def test_normal_incidence(self):
        for eta in (0.3, 1.0, 2.5):
            wr, wt, cr, ct = et.snell_directions(DOWN, Z_UP, eta)
            np.testing.assert_array_equal(wr, Z_UP)
            np.testing.assert_array_equal(wt, DOWN)
            assert cr == 1.0 and ct == 1.0

    def test_index_matched_collapses(self):
        wi = oblique(45.0)
        wr, wt, cr, ct = et.snell_directions(wi, Z_UP, 1.0)
        np.testing.assert_allclose(wt, wi, atol=1e-15)
        assert ct == pytest.approx(cr, abs=1e-15)

    def test_half_eta_45deg(self):
        wi = oblique(45.0)
        _, wt, cr, ct = et.snell_directions(wi, Z_UP, 0.5)
        sin_t = math.sqrt(max(0.0, 1.0 - ct * ct))
        assert sin_t == pytest.approx(0.35355, abs=5e-6)
        assert math.degrees(math.asin(sin_t)) == pytest.approx(20.705,
                                                               abs=1e-3)

    def test_reflection_is_mirror(self):
        wi = oblique(30.0)
        wr, _, _, _ = et.snell_directions(wi, Z_UP, 0.7)
        np.testing.assert_allclose(wr, [wi[0], wi[1], -wi[2]], atol=1e-15)

    def test_tir_detection_threshold(self):
        # disc = 1 - eta^2 sin^2(theta); eta = 2, theta = 30 deg -> disc = 0
        wi = oblique(30.0)
        _, wt, _, ct = et.snell_directions(wi, Z_UP, 2.0)
        assert wt is not TIR
        assert ct == pytest.approx(0.0, abs=1e-7)
        _, wt, _, ct = et.snell_directions(oblique(30.2), Z_UP, 2.0)
        assert wt is TIR and ct is TIR
        # the sign of the discriminant is the exact detection rule
        for theta, eta in ((29.0, 2.0), (31.0, 2.0), (50.0, 1.2),
                           (50.0, 1.4)):
            cr = math.cos(math.radians(theta))
            disc = 1.0 - eta * eta * (1.0 - cr * cr)
            _, wt, _, _ = et.snell_directions(oblique(theta), Z_UP, eta)
            assert (wt is TIR) == (disc < 0.0)

    def test_rejects_non_unit_inputs(self):
        with pytest.raises(ValueError):
            et.snell_directions(DOWN * 1.001, Z_UP, 1.0)
        with pytest.raises(ValueError):
            et.snell_directions(DOWN, Z_UP * 0.999, 1.0)
        with pytest.raises(ValueError):
            et.snell_directions(Z_UP, Z_UP, 1.0)  # wrong side

    @given(theta=st.floats(0.0, 89.0), eta=st.floats(0.2, 5.0),
           phi=st.floats(0.0, 360.0))
    @settings(max_examples=200)
    def test_reciprocity(self, theta, eta, phi):
        wi = oblique(theta, phi)
        _, wt, cr, ct = et.snell_directions(wi, Z_UP, eta)
        if wt is TIR:
            return
        _, wt2, _, _ = et.snell_directions(wt, Z_UP, 1.0 / eta)
        assert wt2 is not TIR
        np.testing.assert_allclose(wt2, wi, atol=1e-6)

    @given(theta=st.floats(0.0, 89.0), eta=st.floats(0.2, 5.0))
    @settings(max_examples=100)
    def test_outputs_unit_length(self, theta, eta):
        wi = oblique(theta)
        wr, wt, _, _ = et.snell_directions(wi, Z_UP, eta)
        assert abs(np.linalg.norm(wr) - 1.0) < 1e-6
        if wt is not TIR:
            assert abs(np.linalg.norm(wt) - 1.0) < 1e-6


class TestFresnel:
    def test_matched_impedance_zero(self):
        assert et.fresnel_amplitude(3.3, 3.3, 0.8, 0.8) == 0.0

    def test_water_bone_normal_incidence(self):
        a = et.fresnel_amplitude(1.54, 7.8, 1.0, 1.0)
        assert a == pytest.approx(-0.67024, abs=5e-6)
        assert a * a == pytest.approx(0.44922, abs=1e-5)

    def test_tir_maps_to_unit_amplitude(self):
        assert et.fresnel_amplitude(7.8, 1.54, 0.1, TIR) == 1.0
        assert et.fresnel_amplitude(7.8, 1.54, 0.1, float("nan")) == 1.0

    def test_broadcasts(self):
        cr = np.array([1.0, 0.5])
        a = et.fresnel_amplitude(1.54, 7.8, cr, cr)
        assert a.shape == (2,)
        assert a[0] == pytest.approx(-0.6702355, abs=1e-6)

    @given(z1=st.floats(0.1, 20.0), z2=st.floats(0.1, 20.0),
           theta=st.floats(0.0, 89.0))
    @settings(max_examples=200)
    def test_amplitude_bounded(self, z1, z2, theta):
        wi = oblique(theta)
        _, wt, cr, ct = et.snell_directions(wi, Z_UP, z1 / z2)
        if wt is TIR:
            return
        a = et.fresnel_amplitude(z1, z2, cr, ct)
        assert -1.0 <= a <= 1.0


class TestChooseBranch:
    def test_certain_reflection(self):
        rng = et.RandomStream(1)
        assert all(et.choose_branch(1.0, rng) is Branch.REFLECT
                   for _ in range(50))

    def test_certain_transmission(self):
        rng = et.RandomStream(1)
        assert all(et.choose_branch(0.0, rng) is Branch.TRANSMIT
                   for _ in range(50))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            et.choose_branch(1.5, et.RandomStream(0))

    def test_water_bone_branch_statistics(self):
        a2 = 0.449215687173585
        rng = et.RandomStream(2024)
        n = 100_000
        frac = float(et.choose_branch(np.full(n, a2), rng).mean())
        sigma = math.sqrt(a2 * (1 - a2) / n)
        assert abs(frac - a2) <= 3.0 * sigma

    def test_energy_split_conserves_intensity(self):
        # expected reflected + transmitted intensity equals the incident one
        rng = et.RandomStream(5)
        for a2 in (0.1, 0.449215687173585, 0.9):
            n = 50_000
            reflected = et.choose_branch(np.full(n, a2), rng)
            # each branch carries unit throughput: intensities recombine as
            # the branch frequencies themselves
            i_r = reflected.mean()
            i_t = 1.0 - i_r
            sigma = math.sqrt(a2 * (1 - a2) / n)
            assert abs(i_r - a2) <= 3.5 * sigma
            assert i_r + i_t == pytest.approx(1.0)


class TestGGXDensity:
    def test_on_axis_half_alpha(self):
        d = et.ggx_density(Z_UP, Z_UP, 0.5)
        assert d == pytest.approx(4.0 / math.pi, rel=1e-12)
        assert d == pytest.approx(1.27324, abs=1e-5)

    def test_on_axis_unit_alpha(self):
        assert et.ggx_density(Z_UP, Z_UP, 1.0) == pytest.approx(
            1.0 / math.pi, rel=1e-12)

    def test_below_hemisphere_zero(self):
        h = np.array([1.0, 0.0, 0.0])
        assert et.ggx_density(Z_UP, h, 0.5) == 0.0
        assert et.ggx_density(Z_UP, -Z_UP, 0.5) == 0.0

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            et.ggx_density(Z_UP, Z_UP, 0.0)
        with pytest.raises(ValueError):
            et.ggx_density(Z_UP, Z_UP, 1.1)

    def test_normalization_stratified(self):
        for alpha in (0.1, 0.5, 1.0):
            mass = ggx_cosine_mass_stratified(alpha, 200_000, seed=3)
            assert mass == pytest.approx(1.0, abs=0.01)


class TestMicrofacetSampling:
    def test_specular_limit(self):
        rng = et.RandomStream(9)
        for _ in range(100):
            s = et.sample_microfacet_normal(Z_UP, 1e-6, rng)
            assert float(s.half_vector_h @ Z_UP) > 1.0 - 1e-9

    def test_density_matches_ggx(self):
        rng = et.RandomStream(10)
        for _ in range(100):
            s = et.sample_microfacet_normal(Z_UP, 0.5, rng)
            ref = (et.ggx_density(Z_UP, s.half_vector_h, 0.5)
                   * float(s.half_vector_h @ Z_UP))
            assert s.density == pytest.approx(ref, rel=1e-12)

    def test_theta_median_matches_inverse_cdf(self):
        state = _kernels.stream_init(123, 0)
        out = np.empty((200_000, 3))
        _kernels.sample_h_batch(0.0, 0.0, 1.0, 0.5, state, out)
        thetas = np.arccos(np.clip(out[:, 2], -1.0, 1.0))
        assert np.median(thetas) == pytest.approx(math.atan(0.5), abs=2e-3)

    def test_empirical_cdf_matches_analytic(self):
        alpha = 0.5
        state = _kernels.stream_init(42, 0)
        out = np.empty((200_000, 3))
        _kernels.sample_h_batch(0.0, 0.0, 1.0, alpha, state, out)
        thetas = np.arccos(np.clip(out[:, 2], -1.0, 1.0))
        for q in (0.1, 0.25, 0.5, 0.75, 0.9):
            # inverse CDF: u = tan^2 / (alpha^2 + tan^2)
            t = np.tan(np.quantile(thetas, q))
            u = t * t / (alpha * alpha + t * t)
            assert u == pytest.approx(q, abs=5e-3)

    def test_above_surface(self):
        rng = et.RandomStream(11)
        n = random_unit_vectors(np.random.default_rng(0), 20)
        for normal in n:
            for _ in range(20):
                s = et.sample_microfacet_normal(normal, 1.0, rng)
                assert float(s.half_vector_h @ normal) > 0.0


class TestScatter:
    def test_index_matched_smooth_transmits_straight(self):
        _, hit = up_hit()
        rng = et.RandomStream(3)
        out = et.scatter(hit, DOWN, (1.0, 1.0), 1e-6, rng)
        np.testing.assert_allclose(out.out_direction, DOWN, atol=1e-6)
        assert out.throughput == 1.0

    def test_full_reflection_smooth_is_mirror(self):
        _, hit = up_hit()
        rng = et.RandomStream(4)
        wi = oblique(25.0)
        out = et.scatter(hit, wi, (1.0, 1e9), 1e-6, rng)
        np.testing.assert_allclose(out.out_direction,
                                   [wi[0], wi[1], -wi[2]], atol=1e-5)
        assert out.throughput == -1.0  # z1 << z2 flips the sign

    def test_specular_limit_matches_snell(self):
        # the lobe means converge to the deterministic Snell pair; the
        # per-sample spread shrinks linearly with alpha
        (z1, z2), hit = up_hit()
        wi = oblique(45.0)
        wr, wt, _, _ = et.snell_directions(wi, hit.geometric_normal,
                                           z1 / z2)
        rng = et.RandomStream(6)

        def lobe_stats(alpha, n=20_000):
            refl, trans, errs = [], [], []
            for _ in range(n):
                out = et.scatter(hit, wi, (z1, z2), alpha, rng)
                up = out.out_direction[2] > 0
                (refl if up else trans).append(out.out_direction)
                target = wr if up else wt
                c = float(np.clip(out.out_direction @ target, -1.0, 1.0))
                errs.append(math.acos(c))
            def mean_err(vs, target):
                m = np.mean(vs, axis=0)
                m /= np.linalg.norm(m)
                return math.degrees(math.acos(
                    float(np.clip(m @ target, -1.0, 1.0))))
            return (mean_err(refl, wr), mean_err(trans, wt),
                    math.degrees(float(np.median(errs))))

        r_err, t_err, med3 = lobe_stats(1e-3)
        assert r_err < 0.1
        assert t_err < 0.1
        _, _, med4 = lobe_stats(1e-4)
        assert med4 < 0.1
        assert med4 < med3  # spread keeps shrinking with alpha

    def test_reflected_lobe_symmetric_at_normal_incidence(self):
        (z1, z2), hit = up_hit()
        rng = et.RandomStream(8)
        dirs = []
        for _ in range(100_000):
            out = et.scatter(hit, DOWN, (z1, z2), 0.5, rng)
            if out is not None and out.out_direction[2] > 0.0:
                dirs.append(out.out_direction)
        mean = np.mean(dirs, axis=0)
        mean /= np.linalg.norm(mean)
        ang = math.degrees(math.acos(float(np.clip(mean @ Z_UP, -1, 1))))
        assert ang < 1.0

    def test_branch_fractions_match_fresnel(self):
        (z1, z2), hit = up_hit()
        rng = et.RandomStream(12)
        n = 50_000
        refl = 0
        for _ in range(n):
            out = et.scatter(hit, DOWN, (z1, z2), 1e-3, rng)
            refl += out.out_direction[2] > 0.0
        a2 = 0.449215687173585
        sigma = math.sqrt(a2 * (1 - a2) / n)
        assert abs(refl / n - a2) <= 3.5 * sigma

    def test_kill_after_exhausted_resampling(self):
        # grazing arrival on a very rough surface forces below-surface
        # retries; with an adversarial stream some paths die
        (z1, z2), hit = up_hit()
        wi = oblique(89.9)
        killed = 0
        rng = et.RandomStream(99)
        for _ in range(20_000):
            if et.scatter(hit, wi, (z1, z2), 1.0, rng) is None:
                killed += 1
        assert killed > 0

    def test_outputs_unit_length(self):
        (z1, z2), hit = up_hit()
        rng = et.RandomStream(21)
        for theta in (0.0, 20.0, 40.0, 60.0):
            wi = oblique(theta)
            for _ in range(200):
                out = et.scatter(hit, wi, (z1, z2), 0.5, rng)
                if out is not None:
                    assert abs(np.linalg.norm(out.out_direction) - 1.0) \
                        < 1e-6
                    assert abs(out.throughput) == 1.0
                    assert out.density >= 0.0


class TestEvalToward:
    def test_peak_at_mirror_direction(self):
        pair, hit = up_hit()
        wi = oblique(30.0)
        mirror = np.array([wi[0], wi[1], -wi[2]])
        peak = et.eval_toward(hit, wi, mirror, pair, 0.5)
        theta_polar = 30.0
        for phi in np.linspace(10.0, 350.0, 18):
            other = np.array([
                math.sin(math.radians(theta_polar)) * math.cos(
                    math.radians(phi)),
                math.sin(math.radians(theta_polar)) * math.sin(
                    math.radians(phi)),
                math.cos(math.radians(theta_polar))])
            assert et.eval_toward(hit, wi, other, pair, 0.5) <= peak + 1e-12

    def test_below_surface_zero(self):
        pair, hit = up_hit()
        assert et.eval_toward(hit, DOWN, DOWN, pair, 0.5) == 0.0

    def test_hemisphere_integral_near_reflected_fraction(self):
        # quadrature oracle over the upper hemisphere at small roughness,
        # normal incidence: the lobe integrates to about A_r^2
        pair, hit = up_hit()
        alpha = 0.1
        n_t, n_p = 400, 64
        thetas = (np.arange(n_t) + 0.5) * (0.5 * math.pi / n_t)
        phis = (np.arange(n_p) + 0.5) * (2.0 * math.pi / n_p)
        total = 0.0
        for th in thetas:
            row = 0.0
            for ph in phis:
                w = np.array([math.sin(th) * math.cos(ph),
                              math.sin(th) * math.sin(ph), math.cos(th)])
                row += et.eval_toward(hit, DOWN, w, pair, alpha)
            total += row * math.sin(th)
        total *= (0.5 * math.pi / n_t) * (2.0 * math.pi / n_p)
        a2 = 0.449215687173585
        assert total == pytest.approx(a2, rel=0.02)

    def test_transmission_side_query_zero(self):
        pair, hit = up_hit()
        below = np.array([0.3, 0.0, -0.9539392014169457])
        below /= np.linalg.norm(below)
        assert et.eval_toward(hit, DOWN, below, pair, 0.5) == 0.0
