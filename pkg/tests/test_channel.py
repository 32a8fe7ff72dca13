import math

import numpy as np
from django.test import SimpleTestCase

from capa_wmmse.channel import (
    FREE_SPACE_IMPEDANCE, PhysicalConstants, build_channel, build_spda_channel, build_wavenumber_channel,
    green_matrix, green_scalar, mode_indices, sample_metasurface_channel, truncation_order,
)
from capa_wmmse.exceptions import DomainError, SingularityError
from capa_wmmse.geometry import ApertureGeometry


def default_link(side=0.5, distance=10.0):
    return (
        ApertureGeometry(side, side),
        ApertureGeometry(side, side, offset=(0.0, 0.0, distance)),
    )


class PhysicalConstantsTests(SimpleTestCase):
    def test_defaults(self):
        constants = PhysicalConstants()
        self.assertAlmostEqual(constants.wavelength, 0.125)
        self.assertAlmostEqual(constants.wavenumber, 16 * math.pi)
        self.assertAlmostEqual(constants.impedance, 120 * math.pi)
        self.assertEqual(constants.power, 100.0)
        self.assertAlmostEqual(constants.field_scale, 0.03)

    def test_replace(self):
        constants = PhysicalConstants().replace(frequency=5e9, transmit_power=10.0)
        self.assertAlmostEqual(constants.wavelength, 0.06)
        self.assertEqual(constants.power, 10.0)
        self.assertEqual(constants.noise_power, 5.6e-3)

    def test_invalid(self):
        for name in ('frequency', 'noise_power', 'transmit_power', 'power_unit'):
            with self.assertRaises(DomainError):
                PhysicalConstants(**{name: 0.0})
        with self.assertRaises(DomainError):
            PhysicalConstants(noise_power=float('inf'))


class GreenFunctionTests(SimpleTestCase):
    def test_broadside_value(self):
        constants = PhysicalConstants()
        u = np.array([0.0, 1.0, 0.0])
        value = green_scalar((0.0, 0.0, 2.0), (0.0, 0.0, 0.0), u, u, constants)

        expected = -1j * FREE_SPACE_IMPEDANCE * np.exp(-1j * constants.wavenumber * 2.0) / (2 * 0.125 * 2.0)
        self.assertAlmostEqual(value, complex(expected), places=10)

    def test_polarization_projection(self):
        constants = PhysicalConstants()
        u = np.array([0.0, 1.0, 0.0])

        # TEST: no coupling along the polarization axis
        self.assertAlmostEqual(abs(green_scalar((0.0, 3.0, 0.0), (0.0, 0.0, 0.0), u, u, constants)), 0.0, places=12)

        # TEST: orthogonal polarizations do not couple at broadside
        v = np.array([1.0, 0.0, 0.0])
        self.assertAlmostEqual(abs(green_scalar((0.0, 0.0, 3.0), (0.0, 0.0, 0.0), v, u, constants)), 0.0, places=12)

    def test_reciprocity(self):
        constants = PhysicalConstants()
        rng = np.random.default_rng(3)
        a = rng.uniform(-1, 1, (7, 3))
        b = rng.uniform(-1, 1, (5, 3)) + np.array([0.0, 0.0, 4.0])
        u = np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(green_matrix(a, b, u, u, constants), green_matrix(b, a, u, u, constants).T)

    def test_coincident_points(self):
        constants = PhysicalConstants()
        u = np.array([0.0, 1.0, 0.0])
        points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])

        with self.assertRaises(SingularityError) as context:
            green_matrix(points, points[1:], u, u, constants)
        self.assertEqual(context.exception.rx_index, 1)
        self.assertEqual(context.exception.tx_index, 0)


class SampledChannelTests(SimpleTestCase):
    def test_shape_and_bound(self):
        tx, rx = default_link()
        constants = PhysicalConstants()
        chan = build_channel(tx, rx, constants, 4)

        self.assertEqual(chan.shape, (16, 16))

        # TEST: |h| <= eta / (2 lambda d_min) with d_min the plane separation
        bound = constants.field_scale * constants.impedance / (2 * constants.wavelength * 10.0)
        self.assertLessEqual(float(np.max(np.abs(chan.matrix))), bound * (1 + 1e-12))

    def test_weighted_matrix(self):
        tx, rx = default_link()
        chan = build_channel(tx, rx, PhysicalConstants(), 3)
        expected = np.diag(np.sqrt(chan.rx.weights)) @ chan.matrix @ np.diag(np.sqrt(chan.tx.weights))
        np.testing.assert_allclose(chan.weighted_matrix, expected)

    def test_tx_row(self):
        tx, rx = default_link()
        chan = build_channel(tx, rx, PhysicalConstants(), 3)
        np.testing.assert_allclose(chan.tx_row(chan.tx.points), chan.matrix.T)

    def test_overlapping_apertures(self):
        tx = ApertureGeometry(0.5, 0.5)
        with self.assertRaises(SingularityError):
            build_channel(tx, tx, PhysicalConstants(), 3)


class WavenumberChannelTests(SimpleTestCase):
    def test_mode_counts(self):
        self.assertEqual(truncation_order(0.5, 0.125), 4)
        self.assertEqual(mode_indices(0.5, 0.5, 3e8 / 2.4e9).shape, (81, 2))
        self.assertEqual(mode_indices(0.5, 0.5, 3e8 / 7.8e9).shape[0], 729)
        self.assertEqual(mode_indices(0.5, 0.5, 3e8 / 15e9).shape[0], 2601)

    def test_build(self):
        tx, rx = default_link(side=0.25)
        chan = build_channel(tx, rx, PhysicalConstants(), 6)
        wchan = build_wavenumber_channel(chan)

        self.assertEqual(wchan.tx_orders, (2, 2))
        self.assertEqual(wchan.matrix.shape, (25, 25))
        self.assertEqual(wchan.tx_mode_count, 25)
        self.assertEqual(wchan.tx_basis.shape, (36, 25))

        # TEST: the Fourier basis is orthonormal under the quadrature weights
        gram = wchan.tx_basis.conj().T @ (chan.tx.weights[:, None] * wchan.tx_basis)
        self.assertAlmostEqual(float(np.real(gram[12, 12])), 1.0, places=10)

    def test_parseval(self):
        tx, rx = default_link(side=0.25)
        chan = build_channel(tx, rx, PhysicalConstants(), 20)
        wchan = build_wavenumber_channel(chan)

        rng = np.random.default_rng(2)
        coefficients = rng.standard_normal((25, 3)) + 1j * rng.standard_normal((25, 3))
        spatial = wchan.spatial(coefficients)

        # TEST: quadrature power of a mode superposition equals its coefficient energy
        power = float(np.sum(chan.tx.weights[:, None] * np.abs(spatial) ** 2))
        energy = float(np.sum(np.abs(coefficients) ** 2))
        self.assertLess(abs(power - energy) / energy, 1e-6)


class DiscreteArrayChannelTests(SimpleTestCase):
    def test_spda(self):
        tx, rx = default_link()
        constants = PhysicalConstants()
        dchan = build_spda_channel(tx, rx, constants)

        self.assertEqual(dchan.tx_counts, (8, 8))
        self.assertEqual(dchan.rx_elements, 64)
        self.assertAlmostEqual(dchan.element_area, 0.125 ** 2 / (4 * math.pi))

        expected = constants.field_scale * dchan.element_area * green_matrix(
            dchan.rx.points, dchan.tx.points, rx.global_polarization, tx.global_polarization, constants
        )
        np.testing.assert_allclose(dchan.matrix, expected)

    def test_metasurface(self):
        tx, rx = default_link(side=0.25)
        constants = PhysicalConstants()
        dchan = sample_metasurface_channel(tx, rx, constants, 0.03125, 0.00625 ** 2)
        self.assertEqual(dchan.tx_elements, 64)

        with self.assertRaises(DomainError):
            sample_metasurface_channel(tx, rx, constants, 0.01, 0.02 ** 2)
        with self.assertRaises(DomainError):
            build_spda_channel(tx, rx, constants, element_area=0.0)
