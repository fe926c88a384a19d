"""Numerical probing of the semiclassical Carleman inequality.

The weight is the real part of a holomorphic Morse phase, convexified by
harmonic auxiliaries: phi_eps = phi - (h/2 eps) sum_j |phi_j|^2.  Because
each phi_j is harmonic, the metric Laplacian of phi_eps is exactly
(h/eps) sum_j |d phi_j|^2, which is kept uniformly positive by choosing one
auxiliary per critical point of phi.  The inequality itself is tested as a
lower bound on the ratio rhs/lhs over seeded families of test functions
vanishing on the boundary; the measured minimum is frozen as a regression
constant, never derived.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .forward import SchrodingerOperator
from .geometry import ConfigurationError, DiskDomain, Mesh, as_values, boundary_integral
from .holo import (
    HoloFunction,
    InfeasibleDegreeError,
    _complex_rows,
    _derivative_row,
    _gamma0_nodes,
    _part_rows,
    _solve_constrained,
)
from .cgo import conjugated_matrix

AUX_NEUMANN_TOL = 1e-4
EPSILON_H_FACTOR = 5.0


@dataclass
class CarlemanWeight:
    """Convexified Carleman weight phi_eps = phi - (h/2 eps) sum |phi_j|^2.

    phi = Re(phase) is the harmonic Morse weight; the auxiliaries g_j are
    holomorphic with phi_j = Im(g_j), normal derivative vanishing on gamma0,
    and d phi_j nonzero at the j-th critical point of phi, so that
    sum_j |d phi_j|^2 stays uniformly positive on the closed disk.
    phi_0 = phi itself is always part of the sum.
    """

    phase: HoloFunction
    auxiliaries: list
    epsilon: float
    h: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epsilon <= 0 or self.h <= 0:
            raise ConfigurationError("epsilon and h must be positive")
        if self.h > self.epsilon / EPSILON_H_FACTOR:
            raise ConfigurationError(
                f"h = {self.h} too large for epsilon = {self.epsilon}: "
                f"the convexified estimate needs h <= epsilon/{EPSILON_H_FACTOR:g}"
            )

    def at(self, h: float) -> "CarlemanWeight":
        """Same weight family at another semiclassical parameter."""
        return CarlemanWeight(self.phase, self.auxiliaries, self.epsilon, h, dict(self.meta))

    def phi(self, z) -> np.ndarray:
        return np.real(self.phase(z))

    def phi_values(self, z) -> list:
        """[phi_0, phi_1, ...] sampled at z."""
        return [np.real(self.phase(z))] + [np.imag(g(z)) for g in self.auxiliaries]

    def gradient_sq(self, z) -> np.ndarray:
        """Euclidean sum_j |grad phi_j|^2 (harmonic conjugates make this
        exactly sum |derivative|^2)."""
        out = np.abs(self.phase.derivative()(z)) ** 2
        for g in self.auxiliaries:
            out = out + np.abs(g.derivative()(z)) ** 2
        return out


def build_auxiliaries(domain: DiskDomain, phase: HoloFunction, degree: int = 16) -> list:
    """One holomorphic g_j per critical point p_j of the phase, with
    g_j'(p_j) = 1 (hard) and normal derivative of Im g_j vanishing on gamma0
    (least squares, verified to AUX_NEUMANN_TOL)."""
    report = phase.meta.get("critical_points")
    if report is None:
        raise ConfigurationError("phase must carry its critical-point report")
    out = []
    for q in report.points:
        p = complex(q.location)
        hard_A, hard_b = _complex_rows([_derivative_row(p, 1, degree)], [1.0])
        if domain.gamma0 is None:
            coeffs = np.zeros(degree + 1, dtype=complex)
            coeffs[1] = 1.0
            g = HoloFunction(coeffs)
        else:
            nodes = _gamma0_nodes(domain, 8 * degree)
            # radial derivative of Im g on the unit circle: Im(g'(t) t)
            k = np.arange(degree + 1)
            rows = k[None, :] * nodes[:, None] ** k[None, :]
            soft_A = _part_rows(rows, "im")
            soft_b = np.zeros(len(nodes))
            coeffs = _solve_constrained(degree, hard_A, hard_b, soft_A, soft_b)
            g = HoloFunction(coeffs)
            check = _gamma0_nodes(domain, 32 * degree)
            resid = np.max(np.abs(np.imag(g.derivative()(check) * check)))
            if resid > AUX_NEUMANN_TOL:
                raise InfeasibleDegreeError(
                    f"gamma0 Neumann residual {resid:.2e} > {AUX_NEUMANN_TOL} "
                    f"for auxiliary at {p:.4f}; raise the degree"
                )
        g.meta["critical_point"] = p
        out.append(g)
    return out


def build_carleman_weight(
    domain: DiskDomain,
    phase: HoloFunction,
    epsilon: float,
    h: float,
    degree: int = 16,
    mesh: Mesh = None,
) -> CarlemanWeight:
    """Assemble the convexified weight and record the positivity margin of
    sum_j |d phi_j|^2 (measured on the mesh when given, else on a dense
    sample of the closed disk)."""
    aux = build_auxiliaries(domain, phase, degree)
    w = CarlemanWeight(phase, aux, epsilon, h)
    if mesh is not None:
        sample = mesh.vertices
    else:
        rr = np.sqrt(np.linspace(0.0, 1.0, 64))
        tt = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
        sample = (rr[:, None] * np.exp(1j * tt)[None, :]).ravel()
    w.meta["gradient_sq_min"] = float(np.min(w.gradient_sq(sample)))
    if w.meta["gradient_sq_min"] <= 0:
        raise InfeasibleDegreeError("sum |d phi_j|^2 not uniformly positive")
    return w


def convexify_weight(weight: CarlemanWeight, mesh: Mesh) -> np.ndarray:
    """phi_eps = phi - (h/2 eps) sum_j |phi_j|^2 sampled on the mesh."""
    z = mesh.vertices
    sq = sum(p**2 for p in weight.phi_values(z))
    return weight.phi(z) - (weight.h / (2.0 * weight.epsilon)) * sq


def convexity_check(weight: CarlemanWeight, mesh: Mesh) -> float:
    """Relative bulk error of the discrete metric Laplacian of phi_eps
    against the exact identity (h/eps) e^{-2 rho} sum_j |grad phi_j|^2."""
    from .forward import stiffness_matrix, lumped_mass

    K = stiffness_matrix(mesh)
    mass = lumped_mass(mesh)
    lap = (K @ convexify_weight(weight, mesh)) / mass
    z = mesh.vertices
    exact = (weight.h / weight.epsilon) * np.exp(-2.0 * mesh.rho_v) * weight.gradient_sq(z)
    bulk = np.abs(z) < 1.0 - 2.0 * mesh.resolution
    num = np.sqrt(np.sum(mesh.vertex_areas[bulk] * (lap - exact)[bulk] ** 2))
    den = np.sqrt(np.sum(mesh.vertex_areas[bulk] * exact[bulk] ** 2))
    return float(num / max(den, 1e-300))


def _ratio_terms(mesh: Mesh, weight: CarlemanWeight, op: SchrodingerOperator, B, u) -> tuple:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ConfigurationError("test function must be a vertex field")
    if np.any(u[mesh.boundary] != 0.0):
        raise ConfigurationError("test function must vanish on the boundary")
    if not np.any(u != 0.0):
        raise ConfigurationError("test function is identically zero; ratio undefined")
    h = weight.h
    z = mesh.vertices
    mass = op.mass
    # metric gradient norm of the unconvexified weight
    dphi_sq = np.exp(-2.0 * mesh.rho_v) * np.abs(weight.phase.derivative()(z)) ** 2
    norm_u = float(np.sum(mass * u**2))
    norm_udphi = float(np.sum(mass * dphi_sq * u**2))
    dirichlet = float(u @ (op.K @ u))
    flux = (op.K @ u)[mesh.boundary] / mesh.boundary_weights
    flux_g0, _ = boundary_integral(flux**2, mesh, "gamma0")
    flux_g, _ = boundary_integral(flux**2, mesh, "gamma")
    lhs = norm_u / h + norm_udphi / h**2 + dirichlet + flux_g0
    conj_residual = np.asarray(B @ u)[mesh.interior] / mass[mesh.interior]
    rhs = float(np.sum(mass[mesh.interior] * conj_residual**2)) + flux_g / h
    return lhs, rhs, rhs / lhs


def carleman_ratio(mesh: Mesh, weight: CarlemanWeight, V, u, op: SchrodingerOperator = None) -> tuple:
    """Both sides of the Carleman inequality for one test function.

    lhs = (1/h)||u||^2 + (1/h^2)||u |d phi|||^2 + ||du||^2 + ||d_nu u||^2_{gamma0}
    rhs = ||e^{-phi_eps/h}(Delta_g+V) e^{phi_eps/h} u||^2 + (1/h)||d_nu u||^2_{gamma}

    u must vanish on every boundary vertex; returns (lhs, rhs, rhs/lhs).
    """
    if op is None:
        op = SchrodingerOperator(mesh, V)
    B = conjugated_matrix(op, convexify_weight(weight, mesh), weight.h)
    return _ratio_terms(mesh, weight, op, B, u)


def sample_test_functions(mesh: Mesh, count: int, seed: int = 0) -> list:
    """Seeded smooth test functions vanishing on the boundary: products of a
    radial factor (1-r^2), an off-center Gaussian bump, and a low-order
    Fourier mode."""
    if count <= 0:
        raise ConfigurationError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    z = mesh.vertices
    r = np.abs(z)
    theta = np.angle(z)
    out = []
    for _ in range(count):
        c = 0.7 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        width = rng.uniform(0.15, 0.6)
        m = rng.integers(0, 5)
        beta = 2.0 * np.pi * rng.uniform()
        u = (1.0 - r**2) * np.exp(-np.abs(z - c) ** 2 / width**2) * np.cos(m * theta + beta)
        u[mesh.boundary] = 0.0
        out.append(u)
    return out


def carleman_sweep(
    mesh: Mesh,
    weight: CarlemanWeight,
    V,
    h_list,
    sample_count: int = 50,
    seed: int = 0,
    csv_path=None,
    json_path=None,
) -> dict:
    """Minimum Carleman ratio over seeded test functions and an h sweep.

    Unresolvable h (weight variation per cell exceeding unity in the
    conjugation) and h beyond the epsilon constraint are skipped with a
    warning.  PASS means every surviving minimum is positive and the
    min-ratio trend does not head to zero as h decreases.
    """
    if sample_count < 1:
        raise ConfigurationError("sample_count must be >= 1")
    samples = sample_test_functions(mesh, sample_count, seed)
    maxgrad = float(np.max(np.abs(weight.phase.derivative()(mesh.vertices))))
    op = SchrodingerOperator(mesh, V)
    rows = []
    minima = {}
    skipped = []
    for h in sorted(set(float(x) for x in h_list), reverse=True):
        if h > weight.epsilon / EPSILON_H_FACTOR:
            msg = f"h = {h} skipped: exceeds epsilon/{EPSILON_H_FACTOR:g} = {weight.epsilon / EPSILON_H_FACTOR}"
            warnings.warn(msg)
            skipped.append({"h": h, "reason": msg})
            continue
        if h < 0.5 * mesh.resolution * maxgrad:
            msg = f"h = {h} skipped: below weight resolvability {0.5 * mesh.resolution * maxgrad:.3g}"
            warnings.warn(msg)
            skipped.append({"h": h, "reason": msg})
            continue
        wh = weight.at(h)
        B = conjugated_matrix(op, convexify_weight(wh, mesh), h)
        best = np.inf
        for sid, u in enumerate(samples):
            lhs, rhs, ratio = _ratio_terms(mesh, wh, op, B, u)
            rows.append({"h": h, "sample_id": sid, "lhs": lhs, "rhs": rhs, "ratio": ratio})
            best = min(best, ratio)
        minima[h] = best
    if not minima:
        raise ConfigurationError("no h in the list was usable for the Carleman sweep")
    hs = np.array(sorted(minima, reverse=True))
    mins = np.array([minima[h] for h in hs])
    c_star = float(np.min(mins))
    if len(hs) >= 2:
        slope, intercept = np.polyfit(hs, mins, 1)
        # ratio shrinking as h decreases = positive slope; flag only when the
        # extrapolated small-h value would cross zero
        trending_to_zero = bool(slope > 0 and intercept <= 0)
    else:
        slope, trending_to_zero = 0.0, False
    v_inf = float(np.max(np.abs(as_values(V, mesh))))
    report = {
        "c_star": c_star,
        "min_ratio_per_h": {repr(float(h)): float(minima[h]) for h in hs},
        "slope_min_ratio_vs_h": float(slope),
        "trending_to_zero": trending_to_zero,
        "pass": bool(c_star > 0 and not trending_to_zero),
        "sample_count": sample_count,
        "seed": seed,
        "epsilon": weight.epsilon,
        "v_inf": v_inf,
        "skipped": skipped,
    }
    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write("h,sample_id,lhs,rhs,ratio\n")
            for r in rows:
                fh.write(f"{r['h']!r},{r['sample_id']},{r['lhs']!r},{r['rhs']!r},{r['ratio']!r}\n")
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report
