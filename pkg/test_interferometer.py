"""
Тесты прямой модели интерферометра и генератора фотонов
"""
import json
import math

import numpy as np
import pytest

from errors import DatasetFormatError, OutsideRegime
from physics.dataset import DetectionDataset, DetectionMode
from physics.interferometer import (
    ModelParams,
    dark_port_mean_shift,
    expected_dataset,
    interference_factor,
    port_density,
    port_probability,
    postselection_probability,
    sample_photons,
    second_order_split_formula,
    split_probabilities_exact,
    split_probabilities_second_order,
)
from physics.spectrum import Spectrum
from rng import substream


def test_port_density_without_delay(narrow_spectrum):
    omega = np.linspace(1.7e15, 2.3e15, 7)
    p0 = narrow_spectrum.density(omega)
    m = ModelParams(tau=0.0, phi=math.pi / 2, spectrum=narrow_spectrum)
    for q in (1, -1):
        np.testing.assert_allclose(port_density(m, q, omega), p0 / 2, rtol=1e-15)

    bright = ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum)
    np.testing.assert_allclose(port_density(bright, 1, omega), p0, rtol=1e-15)
    np.testing.assert_array_equal(port_density(bright, -1, omega), 0.0)


def test_port_density_arithmetic():
    """θ = 0.5, φ = 1.0, ε = 0.3, u = 0.7, ρ = 5"""
    s = Spectrum.gaussian(5.0e14, 1.0e14, n_sigma=4.0)
    m = ModelParams.from_theta(0.5, 1.0, s, epsilon=0.3)
    omega = s.center + 0.7 * s.spread
    for q in (1, -1):
        expected = 0.5 * s.density(omega) * (1 + q * math.exp(-0.045) * math.cos(1.0 - 0.5 * (s.rho + 0.7)))
        assert port_density(m, q, omega) == pytest.approx(expected, rel=1e-12)
    assert s.rho == pytest.approx(5.0, rel=1e-2)


@pytest.mark.parametrize("theta,phi,epsilon", [(0.0, 0.3, 0.0), (1e-3, 1.0, 0.2), (0.05, 2.5, 0.5), (-0.02, 4.0, 0.0)])
def test_port_probabilities_normalized(narrow_spectrum, theta, phi, epsilon):
    m = ModelParams.from_theta(theta, phi, narrow_spectrum, epsilon)
    assert port_probability(m, 1) + port_probability(m, -1) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("phi", [0.0, 0.4, math.pi / 2, 2.0, math.pi])
def test_port_probability_without_delay(narrow_spectrum, phi):
    m = ModelParams(tau=0.0, phi=phi, spectrum=narrow_spectrum)
    for q in (1, -1):
        assert port_probability(m, q) == pytest.approx(0.5 * (1 + q * math.cos(phi)), abs=1e-12)


def test_port_probability_characteristic_function(narrow_spectrum):
    """φ = π/2: P_q = ½(1 + q·e^{−θ²/2}·sin(ρθ))"""
    theta = 0.05
    m = ModelParams.from_theta(theta, math.pi / 2, narrow_spectrum)
    expected = 0.5 * (1 + math.exp(-theta ** 2 / 2) * math.sin(narrow_spectrum.rho * theta))
    assert port_probability(m, 1) == pytest.approx(expected, abs=1e-8)


def test_strong_fluctuations_suppress_interference(narrow_spectrum):
    m = ModelParams.from_theta(0.01, 0.3, narrow_spectrum, epsilon=10.0)
    assert port_probability(m, 1) == pytest.approx(0.5, abs=1e-10)


def test_port_symmetry_parity_periodicity(narrow_spectrum):
    omega = np.linspace(1.5e15, 2.5e15, 41)
    m = ModelParams.from_theta(0.02, 0.7, narrow_spectrum, epsilon=0.1)
    shifted = m.replace(phi=m.phi + math.pi)
    mirrored = m.replace(tau=-m.tau, phi=-m.phi)
    periodic = m.replace(phi=m.phi + 2 * math.pi)
    for q in (1, -1):
        np.testing.assert_allclose(port_density(shifted, q, omega), port_density(m, -q, omega),
                                   rtol=1e-9, atol=1e-30)
        np.testing.assert_allclose(port_density(mirrored, q, omega), port_density(m, q, omega), rtol=1e-12)
        np.testing.assert_allclose(port_density(periodic, q, omega), port_density(m, q, omega),
                                   rtol=1e-9, atol=1e-30)


@pytest.mark.parametrize("phi,epsilon,phase_shift", [(0.3, 0.1, 0.0), (1.2, 0.3, 0.5), (2.0, 0.6, -1.1)])
def test_convolution_identity(phi, epsilon, phase_shift):
    """Среднее по φ′ ~ Normal(φ, ε²) совпадает с множителем e^{−ε²/2}"""
    n = 1_000_000
    phi_prime = phi + epsilon * substream(5).standard_normal(n)
    for q in (1, -1):
        values = 0.5 * (1 + q * np.cos(phi_prime - phase_shift))
        expected = 0.5 * interference_factor(q, math.exp(-0.5 * epsilon ** 2), phi - phase_shift)
        standard_error = values.std() / math.sqrt(n)
        assert abs(values.mean() - expected) < 5 * standard_error + 1e-15


def test_split_exact_trivial_points(narrow_spectrum, carrier_model):
    p = split_probabilities_exact(carrier_model(narrow_spectrum, 0.0, math.pi / 2))
    np.testing.assert_allclose(p, 0.25, atol=1e-10)

    dark = split_probabilities_exact(ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum))
    np.testing.assert_allclose(dark[:, 0], 0.5, atol=1e-10)
    np.testing.assert_allclose(dark[:, 1], 0.0, atol=1e-12)


@pytest.mark.parametrize("theta,epsilon,ratio,phase", [(3e-3, 0.2, 0.3, 1.0), (1e-2, 0.0, 0.0, math.pi / 2),
                                                       (0.1, 0.5, 1.0, 2.0)])
def test_split_exact_normalized(narrow_spectrum, carrier_model, theta, epsilon, ratio, phase):
    p = split_probabilities_exact(carrier_model(narrow_spectrum, theta, phase, epsilon, ratio))
    assert p.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(p >= 0)


def test_second_order_formula_arithmetic():
    p = second_order_split_formula(1e-3, math.pi / 2)
    step = 1e-3 / (2 * math.sqrt(2 * math.pi))
    assert step == pytest.approx(1.9947e-4, rel=1e-4)
    np.testing.assert_allclose(p, [[0.25 + step, 0.25 - step], [0.25 - step, 0.25 + step]], rtol=1e-14)
    assert second_order_split_formula(0.0, math.pi / 2).tolist() == [[0.25, 0.25], [0.25, 0.25]]


@pytest.mark.parametrize("theta,phi,epsilon,ratio", [(2e-3, 0.3, 0.1, 0.0), (1e-2, 2.0, 0.4, 0.5), (5e-2, 4.0, 0.0, 2.0)])
def test_second_order_formula_sums_to_one(theta, phi, epsilon, ratio):
    assert second_order_split_formula(theta, phi, epsilon, ratio).sum() == pytest.approx(1.0, abs=1e-15)


def test_second_order_formula_outside_regime():
    with pytest.raises(OutsideRegime):
        second_order_split_formula(3.0, math.pi / 2)


@pytest.mark.parametrize("theta", [1e-3, 3e-3, 1e-2])
@pytest.mark.parametrize("epsilon", [0.0, 0.2])
@pytest.mark.parametrize("ratio", [0.0, 0.3])
@pytest.mark.parametrize("phase", [math.pi / 2, 1.0])
def test_exact_matches_second_order(narrow_spectrum, carrier_model, theta, epsilon, ratio, phase):
    m = carrier_model(narrow_spectrum, theta, phase, epsilon, ratio)
    difference = np.abs(split_probabilities_exact(m) - split_probabilities_second_order(m))
    assert difference.max() <= 10 * theta ** 3 + 1e-10


def test_sample_empty(narrow_spectrum):
    m = ModelParams(tau=0.0, phi=1.0, spectrum=narrow_spectrum)
    dataset = sample_photons(m, "spectrometer", 0, seed=1)
    assert dataset.n_photons == 0
    assert sample_photons(m, "split", 0, seed=1).n_photons == 0


def test_sample_deterministic(narrow_spectrum):
    m = ModelParams.from_theta(0.01, 1.0, narrow_spectrum, epsilon=0.2)
    first = sample_photons(m, "spectrometer", 5000, seed=7, chunk_size=1024)
    second = sample_photons(m, "spectrometer", 5000, seed=7, chunk_size=1024)
    np.testing.assert_array_equal(first.q, second.q)
    np.testing.assert_array_equal(first.omega, second.omega)
    split = sample_photons(m, "split", 5000, seed=7)
    np.testing.assert_array_equal(split.counts, sample_photons(m, "split", 5000, seed=7).counts)


def test_sample_port_fraction(narrow_spectrum):
    """N = 10⁶, τ = 0, φ = π/3: f₊ ≈ 0.75"""
    n = 1_000_000
    m = ModelParams(tau=0.0, phi=math.pi / 3, spectrum=narrow_spectrum)
    fraction = sample_photons(m, "spectrometer", n, seed=3).port_fractions()[0]
    assert abs(fraction - 0.75) < 5 * math.sqrt(0.75 * 0.25 / n)


def test_sample_fluctuations_visible(narrow_spectrum):
    """ε = 0.3 согласуется с e^{−ε²/2}, но не с моделью без флуктуаций"""
    n = 1_000_000
    m = ModelParams(tau=0.0, phi=math.pi / 3, spectrum=narrow_spectrum, epsilon=0.3)
    fraction = sample_photons(m, "split", n, seed=4).port_fractions()[0]
    noisy = 0.5 * (1 + math.exp(-0.045) * 0.5)
    sigma = math.sqrt(noisy * (1 - noisy) / n)
    assert abs(fraction - noisy) < 5 * sigma
    assert abs(fraction - 0.75) > 5 * sigma


def test_sample_split_cells(narrow_spectrum, carrier_model):
    n = 1_000_000
    m = carrier_model(narrow_spectrum, 0.05, math.pi / 2, 0.1, 0.3)
    observed = sample_photons(m, "split", n, seed=9).cell_fractions()
    expected = split_probabilities_exact(m)
    assert np.all(np.abs(observed - expected) < 5 * np.sqrt(expected * (1 - expected) / n))


def test_sample_pulse_mode(narrow_spectrum):
    m = ModelParams.from_theta(0.01, 1.0, narrow_spectrum, epsilon=0.3)
    first = sample_photons(m, "spectrometer", 10_000, seed=5, fluctuation="pulse", photons_per_pulse=100)
    again = sample_photons(m, "spectrometer", 10_000, seed=5, fluctuation="pulse", photons_per_pulse=100)
    assert first.n_photons == 10_000
    np.testing.assert_array_equal(first.q, again.q)
    with pytest.raises(ValueError):
        sample_photons(m, "spectrometer", 10, seed=5, fluctuation="pulse", photons_per_pulse=0)


def test_expected_dataset_is_normalized(narrow_spectrum, carrier_model):
    m = carrier_model(narrow_spectrum, 0.01, 1.1, 0.2)
    spectrometer = expected_dataset(m, DetectionMode.SPECTROMETER)
    split = expected_dataset(m, DetectionMode.SPLIT)
    assert spectrometer.exact and split.exact
    assert spectrometer.n_photons == pytest.approx(1.0, abs=1e-10)
    assert split.n_photons == pytest.approx(1.0, abs=1e-10)
    assert spectrometer.port_fractions()[0] == pytest.approx(port_probability(m, 1), abs=1e-10)


def test_postselection_and_dark_port_shift(narrow_spectrum, carrier_model):
    """Сдвиг частоты тёмного порта ≈ −2Δω²τ/α"""
    assert postselection_probability(ModelParams(tau=0.0, phi=0.3, spectrum=narrow_spectrum)) == \
        pytest.approx(0.5 * (1 - math.cos(0.3)), abs=1e-12)

    alpha, theta = 0.1, 1e-4
    m = carrier_model(narrow_spectrum, theta, alpha)
    shift = dark_port_mean_shift(m)
    assert shift == pytest.approx(-2 * narrow_spectrum.spread * theta / alpha, rel=1e-2)


def test_model_params_validation(narrow_spectrum):
    with pytest.raises(ValueError):
        ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum, epsilon=-0.1)
    with pytest.raises(ValueError):
        ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum, omega_noise=-1.0)
    m = ModelParams.from_theta(1e-3, 0.0, narrow_spectrum, omega_ratio=0.3)
    assert m.theta == pytest.approx(1e-3, rel=1e-14)
    assert m.omega_ratio == pytest.approx(0.3, rel=1e-14)
    assert m.in_working_range


def test_dataset_round_trip(tmp_path, narrow_spectrum):
    m = ModelParams.from_theta(0.01, 1.0, narrow_spectrum)
    dataset = sample_photons(m, "spectrometer", 200, seed=21)
    csv_path, json_path = dataset.save(tmp_path / "data.csv")
    assert json_path.exists()
    loaded = DetectionDataset.load(csv_path)
    np.testing.assert_array_equal(loaded.q, dataset.q)
    np.testing.assert_array_equal(loaded.omega, dataset.omega)
    assert loaded.seed == 21
    assert loaded.truth["tau"] == pytest.approx(m.tau, rel=1e-15)


@pytest.mark.parametrize("table", [[[1.0]], [], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]])
def test_dataset_load_rejects_malformed_spectrum_table(tmp_path, narrow_spectrum, table):
    dataset = DetectionDataset(DetectionMode.SPLIT, narrow_spectrum, counts=[[5, 3], [2, 4]])
    csv_path, json_path = dataset.save(tmp_path / "cells.csv")
    meta = json.loads(json_path.read_text(encoding="utf-8"))
    meta["spectrum"] = {"kind": "tabulated", "support": [1.0e15, 3.0e15], "table": table}
    json_path.write_text(json.dumps(meta), encoding="utf-8")
    with pytest.raises(DatasetFormatError) as error:
        DetectionDataset.load(csv_path)
    assert error.value.path == str(json_path)
