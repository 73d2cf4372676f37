"""
Тесты информации Фишера, границ точности и кривых предельной точности
"""
import math

import numpy as np
import pytest

from errors import SingularInformation, SingularModel, UndefinedBound, UndefinedBudget
from information.bounds import (
    PrecisionCurve,
    Scheme,
    bias_factor,
    bound_audit,
    closed_form_bounds,
    crossover,
    export_curves,
    photon_budget,
    spectrometer_bound,
    split_bound,
    ultimate_curves,
)
from information.fisher import FisherMatrix, cramer_rao, fisher_spectrometer, fisher_split
from physics.interferometer import ModelParams
from physics.spectrum import Spectrum


@pytest.fixture
def balanced_point(narrow_spectrum):
    """τ = 0, φ = π/2, без помех"""
    return ModelParams(tau=0.0, phi=math.pi / 2, spectrum=narrow_spectrum)


def test_spectrometer_fisher_at_balance(balanced_point):
    s = balanced_point.spectrum
    carrier = fisher_spectrometer(balanced_point).carrier_frame()
    assert carrier.frame == "carrier"
    assert carrier.tau_tau == pytest.approx(s.spread ** 2, rel=1e-6)
    assert carrier.phi_phi == pytest.approx(1.0, rel=1e-9)
    assert abs(carrier.tau_phi) < 1e-6 * s.spread


def test_spectrometer_fisher_absolute_frame(balanced_point):
    """В абсолютной фазе 𝓘_τφ = −ω₀, 𝓘_ττ = Δω² + ω₀²"""
    s = balanced_point.spectrum
    f = fisher_spectrometer(balanced_point)
    assert f.frame == "absolute"
    assert f.tau_phi == pytest.approx(-s.center, rel=1e-6)
    assert f.tau_tau == pytest.approx(s.spread ** 2 + s.center ** 2, rel=1e-9)


def test_spectrometer_cramer_rao_ratio(balanced_point):
    s = balanced_point.spectrum
    n = 1e7
    delta_tau, delta_phi = cramer_rao(fisher_spectrometer(balanced_point), n)
    assert delta_tau / spectrometer_bound(s.spread, 0.0, n) == pytest.approx(4.0, rel=1e-6)
    assert delta_phi > 0


def test_split_fisher_at_balance(balanced_point):
    """𝓘_θθ = 2/π, 𝓘_φφ = 1, перекрёстный член ноль"""
    s = balanced_point.spectrum
    carrier = fisher_split(balanced_point).carrier_frame()
    assert carrier.tau_tau / s.spread ** 2 == pytest.approx(2 / math.pi, rel=1e-6)
    assert carrier.phi_phi == pytest.approx(1.0, rel=1e-9)
    assert abs(carrier.tau_phi) < 1e-9 * s.spread


def test_split_cramer_rao_ratio(balanced_point):
    s = balanced_point.spectrum
    n = 1e7
    delta_tau, _ = cramer_rao(fisher_split(balanced_point), n)
    assert delta_tau / split_bound(s.spread, 0.0, 0.0, math.pi / 2, n) == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("which", ["exact", "second_order"])
def test_split_fisher_finite_differences(narrow_spectrum, carrier_model, which):
    m = carrier_model(narrow_spectrum, 2e-3, 1.1, 0.2, 0.3)
    analytic = fisher_split(m, which).carrier_frame()
    numeric = fisher_split(m, which, derivatives="fd").carrier_frame()
    np.testing.assert_allclose(numeric.as_array(), analytic.as_array(), rtol=1e-5)


def test_split_fisher_unknown_derivatives(balanced_point):
    with pytest.raises(ValueError):
        fisher_split(balanced_point, derivatives="symbolic")


@pytest.mark.parametrize("theta,phase,epsilon", [(1e-3, 1.0, 0.0), (0.05, 2.0, 0.3), (0.0, 0.4, 0.5)])
def test_fisher_symmetric_positive(narrow_spectrum, carrier_model, theta, phase, epsilon):
    m = carrier_model(narrow_spectrum, theta, phase, epsilon)
    for f in (fisher_spectrometer(m), fisher_split(m)):
        array = f.carrier_frame().as_array()
        np.testing.assert_array_equal(array, array.T)
        assert array[0, 0] > 0 and array[1, 1] > 0
        assert f.determinant > 0


def test_fluctuations_reduce_information(narrow_spectrum, carrier_model):
    clean = fisher_spectrometer(carrier_model(narrow_spectrum, 1e-3, 1.0)).carrier_frame()
    noisy = fisher_spectrometer(carrier_model(narrow_spectrum, 1e-3, 1.0, 0.3)).carrier_frame()
    assert noisy.tau_tau < clean.tau_tau
    assert noisy.phi_phi < clean.phi_phi


def test_spectrometer_fisher_singular_model(narrow_spectrum):
    with pytest.raises(SingularModel):
        fisher_spectrometer(ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum))


def test_split_fisher_singular_model(narrow_spectrum):
    with pytest.raises(SingularModel):
        fisher_split(ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum))


def test_singular_information():
    with pytest.raises(SingularInformation):
        cramer_rao(FisherMatrix(tau_tau=1.0, tau_phi=1.0, phi_phi=1.0), 100)


@pytest.mark.parametrize("rho", [20.0, 1e7])
def test_spectrometer_cramer_rao_narrow_band(rho):
    """Карта несущей diag(Δω², 1) регулярна при любом ω₀/Δω"""
    spectrum = Spectrum.gaussian(1.0e16, 1.0e16 / rho)
    f = fisher_spectrometer(ModelParams(tau=0.0, phi=math.pi / 2, spectrum=spectrum))
    n = 1e6
    delta_tau, delta_phi = cramer_rao(f, n)
    assert delta_tau == pytest.approx(1.0 / (spectrum.spread * math.sqrt(n)), rel=1e-6)
    assert delta_phi == pytest.approx(math.sqrt((1.0 + spectrum.rho ** 2) / n), rel=1e-6)
    assert f.determinant == pytest.approx(spectrum.spread ** 2, rel=1e-6)


@pytest.mark.parametrize("rho", [20.0, 1e7])
def test_split_cramer_rao_narrow_band(rho):
    spectrum = Spectrum.gaussian(1.0e16, 1.0e16 / rho)
    f = fisher_split(ModelParams(tau=0.0, phi=math.pi / 2, spectrum=spectrum))
    n = 1e6
    delta_tau, _ = cramer_rao(f, n)
    assert delta_tau == pytest.approx(1.0 / (spectrum.spread * math.sqrt(2 / math.pi * n)), rel=1e-6)
    assert f.total(n).determinant == pytest.approx(n ** 2 * 2 / math.pi * spectrum.spread ** 2, rel=1e-6)


def test_cramer_rao_needs_photons(balanced_point):
    with pytest.raises(ValueError):
        cramer_rao(fisher_spectrometer(balanced_point), 0.5)


def test_frames_round_trip(narrow_spectrum, carrier_model):
    f = fisher_spectrometer(carrier_model(narrow_spectrum, 1e-2, 1.3, 0.1))
    back = f.carrier_frame().absolute()
    np.testing.assert_allclose(back.as_array(), f.as_array(), rtol=1e-9)
    total = f.total(1e6)
    assert not total.per_photon
    assert total.phi_phi == pytest.approx(1e6 * f.phi_phi)


def test_fisher_unit_scaling(narrow_spectrum, carrier_model):
    m = carrier_model(narrow_spectrum, 1e-3, 1.0)
    scaled = ModelParams(tau=m.tau / 3.0, phi=m.phi, spectrum=narrow_spectrum.scaled(3.0))
    expected = fisher_spectrometer(m).scaled_units(3.0).carrier_frame()
    actual = fisher_spectrometer(scaled).carrier_frame()
    np.testing.assert_allclose(actual.as_array(), expected.as_array(), rtol=1e-8)


def test_bounds_arithmetic():
    assert spectrometer_bound(1e15, 0.0, 1e7) == pytest.approx(7.906e-20, rel=1e-4)
    assert split_bound(1e15, 0.0, 0.0, math.pi / 2, 1e7) == pytest.approx(
        math.sqrt(2 * math.pi) * 7.90569e-20, rel=1e-5)
    assert spectrometer_bound(1e15, 0.2, 1e7) == pytest.approx(math.exp(0.02) * 7.90569e-20, rel=1e-5)
    spectrometer, split = closed_form_bounds(1e15, 0.0, 0.0, math.pi / 2, 1e7)
    assert split / spectrometer == pytest.approx(math.sqrt(2 * math.pi))


def test_bias_factor():
    assert bias_factor(0.2, math.pi / 2) == pytest.approx(1.02)
    assert bias_factor(0.0, math.pi / 2, 0.3) == pytest.approx(1.045)
    assert bias_factor(0.2, math.pi / 6) == pytest.approx(1.08)
    with pytest.raises(UndefinedBound):
        bias_factor(0.1, 0.0)
    with pytest.raises(UndefinedBound):
        split_bound(1e15, 0.1, 0.0, math.pi, 100)


def test_bounds_reject_bad_inputs():
    with pytest.raises(ValueError):
        spectrometer_bound(0.0, 0.0, 10)
    with pytest.raises(ValueError):
        spectrometer_bound(1e15, 0.0, 0.0)


def test_photon_budget():
    assert photon_budget(1e15, 1e-18) == 10_000_000
    assert photon_budget(1e15, -1e-18) == 10_000_000
    assert photon_budget(1e14, 3e-17) == math.ceil(10 / (1e14 * 3e-17) ** 2)
    with pytest.raises(UndefinedBudget):
        photon_budget(1e15, 0.0)


def test_ultimate_curves():
    tau = [1e-19, 1e-18, 1e-17]
    curves = {c.scheme: c for c in ultimate_curves(0.02, 0.25e-18, 2e15, tau)}
    np.testing.assert_allclose(curves[Scheme.STANDARD].delta_tau_ult, 1e-17, rtol=1e-12)
    np.testing.assert_allclose(curves[Scheme.WVA].delta_tau_ult, 5e-21, rtol=1e-12)
    assert curves[Scheme.JOINT].delta_tau_ult[1] == pytest.approx(2e-22, rel=1e-12)
    assert crossover(0.02, 0.25e-18) == pytest.approx(2.5e-17, rel=1e-12)


def test_joint_curve_beats_wva_below_crossover():
    tau = np.geomspace(1e-20, 1e-15, 51)
    curves = {c.scheme: c for c in ultimate_curves(0.02, 0.25e-18, 2e15, tau)}
    better = curves[Scheme.JOINT].delta_tau_ult < curves[Scheme.WVA].delta_tau_ult
    np.testing.assert_array_equal(better, tau < crossover(0.02, 0.25e-18))


def test_ultimate_curves_validation():
    with pytest.raises(ValueError):
        ultimate_curves(0.0, 1e-18, 2e15, [1e-18])
    with pytest.raises(ValueError):
        ultimate_curves(0.02, 1e-18, 2e15, [])
    with pytest.raises(ValueError):
        PrecisionCurve(Scheme.JOINT, [1.0, 2.0], [1.0])


def test_export_curves_csv(tmp_path):
    curves = ultimate_curves(0.02, 0.25e-18, 2e15, [1e-18, 1e-17])
    path = export_curves(curves, tmp_path / "curves.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "scheme,tau,delta_tau_ult"
    assert len(lines) == 7
    assert lines[1].startswith("StandardInterferometry,")


def test_export_curves_gnuplot(tmp_path):
    curves = ultimate_curves(0.02, 0.25e-18, 2e15, [1e-18, 1e-17])
    text = export_curves(curves, tmp_path / "curves.dat", gnuplot=True).read_text(encoding="utf-8")
    blocks = text.strip().split("\n\n\n")
    assert len(blocks) == 3
    assert blocks[2].splitlines()[0] == "# JointWeakMeasurement"
    assert len(blocks[2].splitlines()) == 3


def test_bound_audit_at_balance(balanced_point):
    report = bound_audit(balanced_point, 1e6)
    assert report["ratio_spectrometer"] == pytest.approx(4.0, rel=1e-6)
    assert report["ratio_split"] == pytest.approx(2.0, rel=1e-6)
    assert report["cr_split_second_order"] == pytest.approx(report["cr_split_exact"], rel=1e-6)


def test_bound_audit_records_undefined(narrow_spectrum):
    report = bound_audit(ModelParams(tau=0.0, phi=0.0, spectrum=narrow_spectrum), 1e6)
    assert report["cr_spectrometer"] is None
    assert report["closed_form_split"] is None
    assert report["ratio_spectrometer"] is None and report["ratio_split"] is None
    assert report["closed_form_spectrometer"] is not None
