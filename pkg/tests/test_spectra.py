import math

import numpy as np
import pytest

from triwave.model import ModelParams, Packet, packet_mass
from triwave import scattering as sc
from triwave.spectra import (
    ZSData,
    blaschke_a,
    bohr_sommerfeld_spectrum,
    packet_spectrum,
    quantization_count,
    sech_spectrum_exact,
    turning_point_integral,
    wkb_norming_constants,
)


class TestSechExact:
    def test_reference_values(self):
        data = sech_spectrum_exact(1.0, 1.0, 0.4)
        np.testing.assert_allclose(data.taus, [0.8, 0.4], atol=1e-15)

    def test_width_rescaling(self):
        data = sech_spectrum_exact(1.0, 2.0, 0.8)
        np.testing.assert_allclose(data.taus, [0.8, 0.4], atol=1e-15)

    def test_empty_below_threshold(self):
        assert len(sech_spectrum_exact(0.1, 1.0, 0.4)) == 0

    def test_boundary_index_excluded(self):
        data = sech_spectrum_exact(1.0, 1.0, 2.0 / 3.0)
        np.testing.assert_allclose(data.taus, [2.0 / 3.0], atol=1e-15)
        assert data.excluded_boundary_indices == (1,)

    def test_boundary_case_has_no_extra_zero_above_axis(self):
        # The excluded k = 1 index corresponds to tau = 0 exactly; the
        # integrator finds no discrete eigenvalue strictly above the axis.
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        found = sc.zs_locate_eigenvalues(packet, 2.0 / 3.0, (-0.2, 0.2, 0.01, 0.4))
        assert len(found) == 0


class TestTurningPointIntegral:
    def test_sech_closed_form(self):
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        for tau in (0.15, 0.5, 0.85):
            phi = turning_point_integral(packet, tau)
            assert phi == pytest.approx(math.pi * (1.0 - tau), abs=1e-11)

    def test_tau_zero_is_mass(self):
        packet = Packet(mode=1, shape="gaussian", amplitude=1.0)
        assert turning_point_integral(packet, 0.0) == pytest.approx(
            math.sqrt(math.pi), rel=1e-10
        )

    def test_strictly_decreasing(self):
        packet = Packet(mode=1, shape="gaussian", amplitude=1.3)
        taus = np.linspace(0.05, 1.25, 12)
        vals = [turning_point_integral(packet, t) for t in taus]
        assert all(a > b for a, b in zip(vals[:-1], vals[1:]))


class TestBohrSommerfeld:
    def test_exact_for_sech(self):
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        bs = bohr_sommerfeld_spectrum(packet, 0.4)
        np.testing.assert_allclose(bs.taus, [0.8, 0.4], atol=1e-9)

    def test_gaussian_count_and_order(self):
        packet = Packet(mode=2, shape="gaussian", amplitude=1.0)
        bs = bohr_sommerfeld_spectrum(packet, 0.25)
        assert len(bs) == 2
        assert bs.taus[0] > bs.taus[1] > 0.0

    def test_gaussian_matches_oracle(self):
        # WKB accuracy: quantized taus within 0.1 * eps of the integrator's.
        eps = 0.25
        packet = Packet(mode=2, shape="gaussian", amplitude=1.0)
        bs = bohr_sommerfeld_spectrum(packet, eps)
        found = sc.zs_locate_eigenvalues(packet, eps, (-0.3, 0.3, 0.02, 1.1))
        exact = np.sort(found.points.imag)[::-1]
        assert exact.size == len(bs)
        assert np.max(np.abs(bs.taus - exact)) <= 0.1 * eps

    def test_unsatisfiable_quantization_is_empty(self):
        packet = Packet(mode=1, shape="gaussian", amplitude=0.2)
        # mass = 0.2 sqrt(pi) < eps pi / 2
        assert len(bohr_sommerfeld_spectrum(packet, 0.4)) == 0

    def test_translation_invariance(self):
        packet = Packet(mode=1, shape="gaussian", amplitude=1.0)
        moved = packet.translated(-3.7)
        a = bohr_sommerfeld_spectrum(packet, 0.3)
        b = bohr_sommerfeld_spectrum(moved, 0.3)
        np.testing.assert_allclose(a.taus, b.taus, atol=1e-12)

    def test_count_semiclassical_limit(self):
        # N eps -> mass / pi as eps -> 0; for the unit sech |N eps - 1| <= eps.
        prev_n = None
        for eps in (0.8, 0.4, 0.2, 0.1, 0.05):
            n = len(sech_spectrum_exact(1.0, 1.0, eps))
            assert abs(n * eps - 1.0) <= eps + 1e-12
            if prev_n is not None:
                assert n >= prev_n
            prev_n = n

    def test_quantization_count_helper(self):
        assert quantization_count(math.sqrt(math.pi), 0.25) == 2


class TestNormingConstants:
    def test_empty_spectrum(self):
        packet = Packet(mode=1, shape="gaussian", amplitude=0.2)
        data = bohr_sommerfeld_spectrum(packet, 0.4)
        filled = wkb_norming_constants(packet, data, 0.4)
        assert filled.norming is not None and filled.norming.size == 0

    def test_reflectionless_sech_is_exact(self):
        # At A = 2, eps = 1 the quantized ladder is the exact reflectionless
        # data; the convention must reproduce c = (-6i, -2i).
        data = packet_spectrum(Packet(mode=2, shape="sech", amplitude=2.0), 1.0)
        np.testing.assert_allclose(data.norming, [-6.0j, -2.0j], atol=1e-12)

    def test_oracle_alternation(self):
        # Proportionality constants b_k of the truncated sech alternate in
        # sign starting at -1 for the top eigenvalue.
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        taus = np.array([0.8, 0.4])
        c = sc.zs_norming_from_oracle(packet, 0.4, taus)
        d = 1e-6
        av = sc.zs_minor_values(packet, 0.4, np.concatenate([1j * taus + d, 1j * taus - d]),
                                tol=1e-11)
        aprime = (av[:2] - av[2:]) / (2 * d)
        b = c * aprime
        np.testing.assert_allclose(b, [-1.0, 1.0], atol=1e-6)

    def test_wkb_matches_oracle_phase(self):
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        wkb = packet_spectrum(packet, 0.4).norming
        oracle = packet_spectrum(packet, 0.4, convention="oracle-exact").norming
        # Same phase (-i times a positive number), magnitudes within tens of
        # percent (the quantized ladder drops the continuous spectrum).
        for cw, co in zip(wkb, oracle):
            assert cw.real == pytest.approx(0.0, abs=1e-10)
            assert cw.imag < 0 and co.imag < 0
            assert abs(co.real) <= 1e-6 * abs(co)
            assert 0.5 <= abs(co) / abs(cw) <= 2.0

    def test_epsilon_mismatch_rejected(self):
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        data = sech_spectrum_exact(1.0, 1.0, 0.4)
        with pytest.raises(ValueError, match="epsilon"):
            wkb_norming_constants(packet, data, 0.5)


class TestZSDataInvariants:
    def test_taus_must_decrease(self):
        with pytest.raises(ValueError, match="decreasing"):
            ZSData(0.4, np.array([0.4, 0.8]))

    def test_taus_below_peak(self):
        with pytest.raises(ValueError, match="peak"):
            ZSData(0.4, np.array([1.2, 0.4]), peak=1.0)

    def test_count_matches_mass_rule(self):
        packet = Packet(mode=2, shape="sech", amplitude=1.0)
        mass = packet_mass(packet)
        for eps in (0.8, 0.4, 0.25, 0.1):
            n = len(sech_spectrum_exact(1.0, 1.0, eps))
            assert n == quantization_count(mass, eps)

    def test_blaschke_values(self):
        taus = np.array([0.8, 0.4])
        z = np.array([1j * 0.6])
        val = blaschke_a(taus, z)[0]
        expected = ((0.6 - 0.8) / (0.6 + 0.8)) * ((0.6 - 0.4) / (0.6 + 0.4))
        assert val == pytest.approx(expected, abs=1e-14)
