import numpy as np
import pytest

from calderon import reconstruct as _rc
from calderon.holo import HoloFunction, build_amplitude, build_morse_phase

from conftest import P_STAR, gaussian_bump


# ---------------------------------------------------------------------------
# stationary-phase constant


def test_constant_for_parabola_phase():
    phase = HoloFunction([1j, 0.0, 1.0])  # z^2 + i, critical point 0, Phi'' = 2
    m = _rc.stationary_phase_constant(phase, HoloFunction([1.0]), 0.0)
    assert m.C_p == pytest.approx(np.pi)
    assert m.psi_p == pytest.approx(1.0)
    assert m.hess_abs == pytest.approx(2.0)


def test_constant_scales_with_hessian():
    phase = HoloFunction([1j, 0.0, 2.0])  # Phi'' = 4
    m = _rc.stationary_phase_constant(phase, HoloFunction([1.0]), 0.0)
    assert m.C_p == pytest.approx(np.pi / 2.0)


def test_constant_rejects_noncritical_point():
    phase = HoloFunction([1j, 0.0, 1.0])
    with pytest.raises(_rc.ReconstructionError):
        _rc.stationary_phase_constant(phase, HoloFunction([1.0]), 0.3)


def test_constant_rejects_degenerate_point():
    phase = HoloFunction([1j, 0.0, 0.0, 1.0])  # z^3 + i, degenerate at 0
    with pytest.raises(_rc.ReconstructionError):
        _rc.stationary_phase_constant(phase, HoloFunction([1.0]), 0.0)


def test_oscillatory_oracle_matches_leading_term():
    """Tensor-grid quadrature of e^{2 i psi/h} g against pi h g(0) / |Phi''|
    for Phi = z^2 + i (psi = 2xy + 1) at h = 0.02."""
    h = 0.02
    n = 3000
    x = np.linspace(-1.0, 1.0, n)
    dx = x[1] - x[0]
    X, Y = np.meshgrid(x, x)
    g = np.exp(-(X**2 + Y**2) / 0.25**2)
    val = np.sum(np.exp(2j * (2.0 * X * Y + 1.0) / h) * g) * dx * dx
    want = np.pi * h * 1.0 / 2.0
    assert abs(abs(val) - want) <= 0.05 * want


def test_oscillatory_integral_decays_in_h(mesh_mid):
    phase = HoloFunction([1j, 0.0, 1.0])
    g = lambda z: np.exp(-np.abs(z) ** 2 / 0.25**2)
    big = abs(_rc.oscillatory_integral(g, phase, 0.2, mesh_mid))
    small = abs(_rc.oscillatory_integral(g, phase, 0.05, mesh_mid))
    assert small <= 0.5 * big


# ---------------------------------------------------------------------------
# model fit


def test_fit_recovers_synthetic_coefficients():
    psi_p = 0.8
    h = np.array([0.2, 0.17, 0.14, 0.12, 0.1, 0.08, 0.07, 0.06, 0.05])
    S = 0.3 + 1.2 * h + 0.7 * h * np.cos(2 * psi_p / h)
    fit = _rc.fit_pairing_model(h, S, psi_p)
    assert fit["A"] == pytest.approx(0.3, abs=1e-8)
    assert fit["B"] == pytest.approx(1.2, abs=1e-8)
    assert fit["C"] == pytest.approx(0.7, abs=1e-8)
    assert fit["residual"] <= 1e-10


def test_fit_needs_four_points():
    with pytest.raises(_rc.ReconstructionError):
        _rc.fit_pairing_model([0.2, 0.1, 0.05], [0.0, 0.0, 0.0], 0.8)


def test_fit_rejects_short_oscillation_span():
    # psi so small that the h list covers well under two periods
    with pytest.raises(_rc.ReconstructionError):
        _rc.fit_pairing_model([0.2, 0.14, 0.1, 0.07, 0.05], np.zeros(5), 0.05)


# ---------------------------------------------------------------------------
# interior pointwise recovery (reference scenario)


@pytest.fixture(scope="module")
def ref_phase_amp(ref_scenario):
    dom = ref_scenario.domain
    phase = build_morse_phase(dom, P_STAR, degree=36, psi_target=0.8, seed=0)
    amp = build_amplitude(phase.meta["critical_points"], P_STAR, dom, degree=16)
    return phase, amp


@pytest.fixture(scope="module")
def ref_estimate(ref_mesh, ref_scenario, ref_phase_amp):
    phase, amp = ref_phase_amp
    return _rc.pointwise_difference(
        ref_mesh, ref_scenario.domain, ref_scenario.V1, ref_scenario.V2,
        P_STAR, ref_scenario.h_list, phase=phase, amplitude=amp,
    )


def test_interior_recovery_at_primary_point(ref_estimate):
    # (V1 - V2)(p*) = 1 for the reference bump
    assert 0.8 <= ref_estimate["D"] <= 1.2


def test_interior_control_identical_potentials(ref_mesh, ref_scenario, ref_phase_amp):
    phase, amp = ref_phase_amp
    est = _rc.pointwise_difference(
        ref_mesh, ref_scenario.domain, ref_scenario.V1, ref_scenario.V1,
        P_STAR, ref_scenario.h_list, phase=phase, amplitude=amp,
    )
    # the interior pairing weight (V1 - V2) vanishes identically
    assert est["D"] == 0.0


def test_interior_estimate_scales_with_amplitude(ref_mesh, ref_scenario, ref_phase_amp, ref_estimate):
    phase, amp = ref_phase_amp
    V_half = lambda z: 0.5 * gaussian_bump(z)
    est = _rc.pointwise_difference(
        ref_mesh, ref_scenario.domain, V_half, 0.0,
        P_STAR, ref_scenario.h_list, phase=phase, amplitude=amp,
    )
    assert est["D"] == pytest.approx(0.5 * ref_estimate["D"], rel=0.2)


def test_subsequence_mode_cross_checks_fit(ref_mesh, ref_scenario, ref_phase_amp, ref_estimate):
    phase, amp = ref_phase_amp
    est = _rc.pointwise_difference(
        ref_mesh, ref_scenario.domain, ref_scenario.V1, ref_scenario.V2,
        P_STAR, ref_scenario.h_list, phase=phase, amplitude=amp, mode="subsequence",
    )
    assert est["D"] == pytest.approx(ref_estimate["D"], abs=0.2)


def test_difference_map_localizes_bump(tmp_path, ref_mesh, ref_scenario):
    pts = _rc.make_grid(3, radius=0.3)
    csv_path = tmp_path / "map.csv"
    out = _rc.difference_map(
        ref_mesh, ref_scenario.domain, ref_scenario.V1, ref_scenario.V2,
        pts, ref_scenario.h_list, csv_path=csv_path,
    )
    assert not out["failures"]
    rows = out["rows"]
    assert len(rows) == len(pts)
    got = max(rows, key=lambda r: r["D"])
    true_vals = [gaussian_bump(complex(r["x"], r["y"])) for r in rows]
    want = rows[int(np.argmax(true_vals))]
    assert (got["x"], got["y"]) == (want["x"], want["y"])
    assert csv_path.read_text().splitlines()[0] == "x,y,D,fit_residual,abs_a_p,C_p"


def test_make_grid_stays_inside_radius():
    pts = _rc.make_grid(9, radius=0.5)
    assert np.all(np.abs(pts) <= 0.5 + 1e-12)
    assert len(pts) < 81  # corners trimmed


# ---------------------------------------------------------------------------
# boundary recovery on the accessible arc


WIDE = 0.8


def wide_bump(theta_p, amplitude=1.0):
    p = np.exp(1j * theta_p)
    return lambda z: amplitude * np.exp(-np.abs(np.asarray(z) - p) ** 2 / WIDE**2)


@pytest.fixture(scope="module")
def boundary_cal(ref_mesh, ref_scenario):
    h_list = ref_scenario.config["boundary_h_list"]
    cal = _rc.calibrate_boundary_constant(ref_mesh, ref_scenario.domain, np.pi, h_list)
    return cal, h_list


def test_boundary_sweep_exponent_window(ref_mesh, ref_scenario, boundary_cal):
    _, h_list = boundary_cal
    pairs = _rc.boundary_pairing_sweep(
        ref_mesh, ref_scenario.domain, wide_bump(np.pi), 0.0, np.pi, h_list
    )
    _, e = _rc.fit_boundary_law(pairs)
    assert 1.35 <= e <= 1.65


def test_boundary_recovery_known_value(ref_mesh, ref_scenario, boundary_cal):
    cal, h_list = boundary_cal
    est = _rc.boundary_recovery(
        ref_mesh, ref_scenario.domain, wide_bump(np.pi, 0.7), 0.0, np.pi, h_list,
        calibration=cal,
    )
    assert not est["below_noise_floor"]
    assert est["D"] == pytest.approx(0.7, abs=0.1)


def test_boundary_recovery_sign(ref_mesh, ref_scenario, boundary_cal):
    cal, h_list = boundary_cal
    est = _rc.boundary_recovery(
        ref_mesh, ref_scenario.domain, 0.0, wide_bump(np.pi, 0.7), np.pi, h_list,
        calibration=cal,
    )
    assert est["D"] < -0.4


def test_boundary_calibration_transfers(ref_mesh, ref_scenario, boundary_cal):
    cal, h_list = boundary_cal
    theta = 1.3 * np.pi
    est = _rc.boundary_recovery(
        ref_mesh, ref_scenario.domain, wide_bump(theta, 0.5), 0.0, theta, h_list,
        calibration=cal,
    )
    assert est["D"] == pytest.approx(0.5, rel=0.25)


def test_boundary_noise_floor(ref_mesh, ref_scenario, boundary_cal):
    cal, h_list = boundary_cal
    est = _rc.boundary_recovery(
        ref_mesh, ref_scenario.domain, 0.0, 0.0, np.pi, h_list, calibration=cal
    )
    assert est["below_noise_floor"]
    assert est["D"] == 0.0


def test_boundary_sweep_rejects_unresolved_h(ref_mesh, ref_scenario):
    with pytest.raises(_rc.ReconstructionError):
        _rc.boundary_pairing_sweep(
            ref_mesh, ref_scenario.domain, 0.0, 0.0, np.pi, [0.1, 0.01]
        )


def test_boundary_scan_records_failures(ref_mesh, ref_scenario, boundary_cal):
    cal, h_list = boundary_cal
    # pi is fine; the second angle sits essentially on the end of gamma
    out = _rc.boundary_scan(
        ref_mesh, ref_scenario.domain, wide_bump(np.pi, 0.7), 0.0,
        [np.pi, 0.52 * np.pi], h_list, calibration=cal,
    )
    assert [r["theta"] for r in out["rows"]] == [np.pi]
    assert len(out["failures"]) == 1
