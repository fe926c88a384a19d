"""Holomorphic toolkit on the unit disk.

Polynomial representations of holomorphic functions, a solid Cauchy
transform inverting d/dz on compactly supported data, arc-constrained
least-squares builders (phases real on the inaccessible arc, amplitudes
with prescribed zeros, jet-matching primitives), and a critical-point
finder certified by the argument principle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .geometry import GAMMA0, ConfigurationError, DiskDomain, Mesh, TWO_PI

ARC_RESIDUAL_TOL = 1e-6
HARD_CONSTRAINT_TOL = 1e-10
DEGENERACY_THRESHOLD = 1e-8


class InfeasibleDegreeError(RuntimeError):
    """An arc-constrained fit missed its residual target at the given degree."""


class MorseVerificationError(RuntimeError):
    """A phase candidate failed Morse verification after all retries."""


class HoloFunction:
    """Polynomial in z with complex coefficients (automatically holomorphic)."""

    def __init__(self, coeffs, meta: Optional[dict] = None):
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        self.meta = dict(meta or {})

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out if out.shape else complex(out)

    def derivative(self, order: int = 1) -> "HoloFunction":
        c = self.coeffs
        for _ in range(order):
            if len(c) == 1:
                c = np.zeros(1, dtype=complex)
                break
            c = c[1:] * np.arange(1, len(c))
        return HoloFunction(c)

    def __neg__(self) -> "HoloFunction":
        return HoloFunction(-self.coeffs, meta=self.meta)

    def to_json(self) -> str:
        return json.dumps([[c.real, c.imag] for c in self.coeffs])

    @classmethod
    def from_json(cls, text: str) -> "HoloFunction":
        pairs = json.loads(text)
        return cls([complex(re, im) for re, im in pairs])


# ---------------------------------------------------------------------------
# solid Cauchy transform


def cauchy_transform(f_values, mesh: Mesh, eval_points=None) -> np.ndarray:
    """Solid Cauchy transform R f(z) = (1/pi) * integral of f(xi)/(conj(z-xi)) dA.

    Inverts d/dz: dz(R f) = f at interior points.  Quadrature is one point
    mass per vertex; sources within a vertex's equal-area disk use the exact
    disk-averaged kernel, and the local quadrature defect is removed by
    singularity subtraction: the transform of the indicator of a disk
    centered at the evaluation point vanishes exactly there, so subtracting
    f(z) times its quadrature cancels the near-field error (evaluation never
    fails near a sample singularity).

    f must vanish within two cells of the boundary (compact support).
    """
    f = np.asarray(f_values, dtype=complex)
    if f.shape != (mesh.n_vertices,):
        raise ValueError("f must be sampled at mesh vertices")
    support = np.abs(f) > 0
    sub_radius = 4.0 * mesh.resolution
    if np.any(support):
        rmax = np.max(np.abs(mesh.vertices[support]))
        if rmax > 1.0 - 2.0 * mesh.resolution:
            raise ValueError("support of f must stay two cells away from the boundary")
        # dilate by the subtraction radius: zero-valued sources still carry
        # quadrature weight in the local defect sum
        from scipy.spatial import cKDTree

        tree = cKDTree(np.column_stack([mesh.vertices[support].real, mesh.vertices[support].imag]))
        dist, _ = tree.query(np.column_stack([mesh.vertices.real, mesh.vertices.imag]))
        support = dist <= sub_radius + 1e-12
    if eval_points is None:
        eval_points = mesh.vertices
        f_at_eval = f
    else:
        f_at_eval = None
    z = np.asarray(eval_points, dtype=complex).ravel()
    if f_at_eval is None:
        from scipy.interpolate import LinearNDInterpolator

        pts = np.column_stack([mesh.vertices.real, mesh.vertices.imag])
        zp = np.column_stack([z.real, z.imag])
        interp_re = LinearNDInterpolator(pts, f.real, fill_value=0.0)
        interp_im = LinearNDInterpolator(pts, f.imag, fill_value=0.0)
        f_at_eval = interp_re(zp) + 1j * interp_im(zp)
    else:
        f_at_eval = f_at_eval.ravel()
    src = mesh.vertices[support]
    fs = f[support]
    areas = mesh.vertex_areas[support]
    radii = np.sqrt(areas / np.pi)
    out = np.zeros(len(z), dtype=complex)
    chunk = max(1, int(4e6 / max(1, len(src))))
    for s in range(0, len(z), chunk):
        zz = z[s : s + chunk, None]
        d = zz - src[None, :]
        absd = np.abs(d)
        near = absd < radii[None, :]
        kern = np.empty_like(d)
        dc = np.conj(d)
        np.divide(1.0, dc, out=kern, where=~near)
        # average of the kernel over the equal-area disk centered at the source
        kern[near] = (d / radii[None, :] ** 2)[near]
        kern *= areas[None, :]
        out[s : s + chunk] = kern @ fs
        # singularity subtraction: any radial window centered at z has exact
        # transform 0 there, so its quadrature is pure local defect; a smooth
        # window keeps the rim quadrature clean
        t = np.clip(absd / sub_radius, 0.0, 1.0)
        window = 0.5 * (1.0 + np.cos(np.pi * t))
        out[s : s + chunk] -= f_at_eval[s : s + chunk] * np.sum(kern * window, axis=1)
    out /= np.pi
    return out.reshape(np.shape(eval_points))


# ---------------------------------------------------------------------------
# constrained least-squares fitting engine
#
# Unknowns are x = [Re c_0..Re c_K, Im c_0..Im c_K].  A complex functional
# row r (meaning sum_k r_k c_k = t) expands to two real rows; an arc row
# asking Im(sum c_k w^k) = t or Re(...) = t expands to one real row.


def _complex_rows(rows, targets):
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    t = np.atleast_1d(np.asarray(targets, dtype=complex))
    A = np.vstack(
        [
            np.hstack([rows.real, -rows.imag]),
            np.hstack([rows.imag, rows.real]),
        ]
    )
    b = np.concatenate([t.real, t.imag])
    return A, b


def _part_rows(powers, part):
    """Real row for Re/Im of the polynomial at points given by power matrix."""
    if part == "re":
        return np.hstack([powers.real, -powers.imag])
    if part == "im":
        return np.hstack([powers.imag, powers.real])
    raise ValueError(f"unknown part {part!r}")


def _power_matrix(z, degree):
    z = np.asarray(z, dtype=complex).ravel()
    return z[:, None] ** np.arange(degree + 1)[None, :]


def _derivative_row(z0, order, degree):
    """Complex row of the functional c -> (d/dz)^order P(z0)."""
    k = np.arange(degree + 1)
    row = np.zeros(degree + 1, dtype=complex)
    valid = k >= order
    kk = k[valid]
    fac = np.ones(len(kk))
    for j in range(order):
        fac *= kk - j
    row[valid] = fac * z0 ** (kk - order)
    return row


def _solve_constrained(degree, hard_A, hard_b, soft_A, soft_b, tikhonov=1e-12):
    """Least squares over soft rows subject to exact hard constraints."""
    n = 2 * (degree + 1)
    if hard_A is None or len(hard_A) == 0:
        x0 = np.zeros(n)
        N = np.eye(n)
    else:
        x0, *_ = np.linalg.lstsq(hard_A, hard_b, rcond=None)
        if np.linalg.norm(hard_A @ x0 - hard_b) > HARD_CONSTRAINT_TOL * max(
            1.0, np.linalg.norm(hard_b)
        ):
            raise InfeasibleDegreeError(
                f"hard constraints inconsistent or underrepresented at degree {degree}"
            )
        N = null_space(hard_A)
    if soft_A is None or len(soft_A) == 0:
        x = x0
    else:
        lam = np.sqrt(tikhonov)
        A = np.vstack([soft_A @ N, lam * N])
        b = np.concatenate([soft_b - soft_A @ x0, -lam * x0])
        y, *_ = np.linalg.lstsq(A, b, rcond=None)
        x = x0 + N @ y
    return x[: degree + 1] + 1j * x[degree + 1 :]


def _gamma0_nodes(domain: DiskDomain, count: int) -> np.ndarray:
    a, b = domain.gamma0
    span = np.mod(b - a, TWO_PI)
    theta = a + span * np.linspace(0.0, 1.0, count)
    return np.exp(1j * theta)


def fit_holomorphic_on_arc(
    constraints: Sequence[tuple],
    domain: DiskDomain,
    degree: int,
    part: str = "im",
    arc_target=None,
    nodes_per_degree: int = 8,
    tolerance: float = ARC_RESIDUAL_TOL,
) -> HoloFunction:
    """Polynomial with `part` (re/im) prescribed on gamma0, hard constraints exact.

    constraints: list of (point, derivative order, complex target) interpolation
    conditions enforced exactly.  arc_target: callable of boundary points (or
    None for zero).  The achieved sup-residual on a 4x finer verification grid
    is stored in meta["arc_residual"]; exceeding `tolerance` raises
    InfeasibleDegreeError suggesting a larger degree.
    """
    rows = [_derivative_row(z0, order, degree) for z0, order, _ in constraints]
    targets = [t for _, _, t in constraints]
    hard_A, hard_b = (None, None)
    if rows:
        hard_A, hard_b = _complex_rows(rows, targets)
    soft_A = soft_b = None
    if domain.gamma0 is not None:
        nodes = _gamma0_nodes(domain, nodes_per_degree * max(degree, 1))
        soft_A = _part_rows(_power_matrix(nodes, degree), part)
        soft_b = np.zeros(len(nodes)) if arc_target is None else np.real(arc_target(nodes))
    coeffs = _solve_constrained(degree, hard_A, hard_b, soft_A, soft_b)
    fn = HoloFunction(coeffs)
    residual = 0.0
    if domain.gamma0 is not None:
        fine = _gamma0_nodes(domain, 4 * nodes_per_degree * max(degree, 1))
        vals = fn(fine)
        want = np.zeros(len(fine)) if arc_target is None else np.real(arc_target(fine))
        got = vals.imag if part == "im" else vals.real
        residual = float(np.max(np.abs(got - want)))
    fn.meta["arc_residual"] = residual
    fn.meta["arc_part"] = part
    for z0, order, t in constraints:
        got = fn.derivative(order)(z0)
        if abs(got - t) > HARD_CONSTRAINT_TOL * max(1.0, abs(t)):
            raise InfeasibleDegreeError(
                f"hard constraint at {z0} (order {order}) violated: {got} vs {t}"
            )
    if residual > tolerance:
        raise InfeasibleDegreeError(
            f"arc residual {residual:.2e} exceeds {tolerance:.0e} at degree {degree}; "
            "increase the degree"
        )
    return fn


# ---------------------------------------------------------------------------
# critical points by subdivision + argument principle


@dataclass
class CriticalPoint:
    location: complex
    second_abs: float          # |d^2 Phi| there
    multiplicity: int
    on_boundary: bool
    degenerate: bool


@dataclass
class CriticalPointReport:
    points: list
    count_check: int           # argument-principle winding over the disk contour

    def __post_init__(self):
        located = sum(p.multiplicity for p in self.points)
        if located != self.count_check:
            raise RuntimeError(
                f"critical-point finder missed a zero: winding {self.count_check}, "
                f"located {located}"
            )

    @property
    def is_morse(self) -> bool:
        return all(not p.degenerate for p in self.points)

    def secondary(self, p: complex, tol: float = 1e-9) -> list:
        return [q for q in self.points if abs(q.location - p) > tol]


def _poly_winding(fn: HoloFunction, path: np.ndarray) -> int:
    """Winding number of fn along a closed sampled path (argument increments)."""
    vals = fn(path)
    scale = np.max(np.abs(vals))
    if scale == 0 or np.min(np.abs(vals)) < 1e-12 * scale:
        raise ArithmeticError("zero on contour")
    dphi = np.angle(np.roll(vals, -1) / vals)
    if np.max(np.abs(dphi)) > 0.5 * np.pi:
        raise ArithmeticError("contour sampling too coarse")
    total = np.sum(dphi) / TWO_PI
    w = int(round(total))
    if abs(total - w) > 1e-6:
        raise ArithmeticError("non-integer winding")
    return w


def _circle_winding(fn: HoloFunction, radius: float, samples: int = 2048) -> int:
    for attempt in range(6):
        path = (radius + attempt * 1e-5) * np.exp(
            1j * TWO_PI * np.arange(samples) / samples
        )
        try:
            return _poly_winding(fn, path)
        except ArithmeticError:
            samples *= 2
    raise RuntimeError("could not certify winding number on the disk contour")


def _square_path(cx, cy, half, per_edge):
    t = np.linspace(-1.0, 1.0, per_edge, endpoint=False)
    e1 = (cx + half * t) + 1j * (cy - half)
    e2 = (cx + half) + 1j * (cy + half * t)
    e3 = (cx - half * t) + 1j * (cy + half)
    e4 = (cx - half) + 1j * (cy - half * t)
    return np.concatenate([e1, e2, e3, e4])


def _square_winding(fn, cx, cy, half, rng):
    per_edge = 64
    for _ in range(8):
        try:
            return _poly_winding(fn, _square_path(cx, cy, half, per_edge)), (cx, cy, half)
        except ArithmeticError:
            per_edge *= 2
            if per_edge > 1024:
                # a zero sits (numerically) on the contour: jiggle the square
                cx += float(rng.uniform(-0.05, 0.05)) * half
                cy += float(rng.uniform(-0.05, 0.05)) * half
                half *= 1.0 + float(rng.uniform(0.01, 0.05))
                per_edge = 128
    raise RuntimeError("subdivision contour kept hitting zeros")


def _newton_polish(dphi: HoloFunction, d2phi: HoloFunction, z0, tol=1e-13):
    z = complex(z0)
    for _ in range(60):
        d2 = d2phi(z)
        if abs(d2) < 1e-14:
            return None
        step = dphi(z) / d2
        z -= step
        if abs(step) < tol:
            return z
    return None


def find_critical_points(phi: HoloFunction, domain: DiskDomain, seed: int = 0) -> CriticalPointReport:
    """All zeros of dPhi in the closed disk, certified by the argument principle.

    Subdivision of a bounding square with per-square winding numbers, Newton
    polishing of isolated zeros; the report fails loudly if the located
    count (with multiplicity) disagrees with the winding over the disk
    contour.
    """
    dphi = phi.derivative()
    if np.all(np.abs(dphi.coeffs) == 0):
        raise ValueError("phase is constant")
    d2phi = phi.derivative(2)
    rng = np.random.default_rng(seed)
    contour_r = 1.0 + 1e-6
    total = _circle_winding(dphi, contour_r)

    roots = []  # (location, multiplicity)
    stack = [(0.0, 0.0, 1.02)]
    while stack:
        cx, cy, half = stack.pop()
        # skip squares entirely outside the verification circle
        if np.hypot(max(abs(cx) - half, 0.0), max(abs(cy) - half, 0.0)) > contour_r:
            continue
        try:
            w, (cx, cy, half) = _square_winding(dphi, cx, cy, half, rng)
        except RuntimeError:
            if half < 5e-9:
                raise RuntimeError("could not certify a tiny square around a zero")
            w = None
        if w == 0:
            continue
        if w == 1:
            z = _newton_polish(dphi, d2phi, cx + 1j * cy)
            if z is not None and max(abs(z.real - cx), abs(z.imag - cy)) <= half * 1.05:
                roots.append((z, 1))
                continue
        if w is not None and half < 5e-9:
            roots.append((cx + 1j * cy, w))
            continue
        # split at a jittered center so roots do not sit on shared edges
        sx = cx + float(rng.uniform(-0.1, 0.1)) * half
        sy = cy + float(rng.uniform(-0.1, 0.1)) * half
        x_lo, x_hi = cx - half, cx + half
        y_lo, y_hi = cy - half, cy + half
        for (ax, bx) in ((x_lo, sx), (sx, x_hi)):
            for (ay, by) in ((y_lo, sy), (sy, y_hi)):
                stack.append(((ax + bx) / 2, (ay + by) / 2, max(bx - ax, by - ay) / 2))

    # merge duplicate sightings (overlapping jiggled squares re-find the same
    # zero) and keep zeros inside the verification contour
    merged = []
    for z, m in roots:
        if abs(z) > contour_r:
            continue
        for k, (z2, m2) in enumerate(merged):
            if abs(z - z2) < 1e-7:
                merged[k] = (z2, max(m2, m))
                break
        else:
            merged.append((z, m))

    points = []
    for z, m in merged:
        d2 = abs(d2phi(z))
        points.append(
            CriticalPoint(
                location=z,
                second_abs=d2,
                multiplicity=m,
                on_boundary=abs(abs(z) - 1.0) < 1e-6,
                degenerate=(d2 <= DEGENERACY_THRESHOLD) or (m > 1),
            )
        )
    points.sort(key=lambda q: (q.location.real, q.location.imag))
    return CriticalPointReport(points=points, count_check=total)


# ---------------------------------------------------------------------------
# builders


def _phase_candidate(domain, p, degree, mu, bias=None):
    """One phase fit: Phi(p)=i, dPhi(p)=0 hard; Im Phi=0 on gamma0 and a
    gradient-energy penalty (weight mu) soft.  Returns (fn, arc residual)."""
    cons = [(p, 0, 1j), (p, 1, 0.0)]
    if bias is not None:
        cons = cons + [bias]
    rows = [_derivative_row(z0, order, degree) for z0, order, _ in cons]
    hard_A, hard_b = _complex_rows(rows, [t for _, _, t in cons])
    nodes = _gamma0_nodes(domain, 8 * max(degree, 1))
    arc_rows = _part_rows(_power_matrix(nodes, degree), "im")
    samp = np.exp(1j * TWO_PI * np.arange(4 * degree) / (4 * degree))
    drows = np.array([_derivative_row(z, 1, degree) for z in samp])
    dA, _ = _complex_rows(drows, np.zeros(len(samp)))
    soft_A = np.vstack([arc_rows, mu * dA])
    soft_b = np.zeros(len(soft_A))
    coeffs = _solve_constrained(degree, hard_A, hard_b, soft_A, soft_b, tikhonov=1e-18)
    fn = HoloFunction(coeffs)
    fine = _gamma0_nodes(domain, 32 * max(degree, 1))
    return fn, float(np.max(np.abs(fn(fine).imag)))


def build_morse_phase(
    domain: DiskDomain,
    p: complex,
    degree: int = 16,
    seed: int = 0,
    psi_target: float = 1.0,
    residual_tol: float = ARC_RESIDUAL_TOL,
    max_retries: int = 8,
) -> HoloFunction:
    """Holomorphic Morse phase: dPhi(p)=0 exactly, Phi(p)=i*psi_target,
    Im Phi = 0 on gamma0 within residual_tol.

    Among fits meeting the residual target the builder takes the one with
    the smallest gradient energy (largest feasible penalty weight, found by
    bisection), since downstream semiclassical solves must resolve
    oscillations at wavelength ~ h/|dPhi|.  psi_target rescales the whole
    phase; Im Phi(p) = psi_target stays nonzero.  Degenerate outcomes are
    retried with a randomized soft Hessian bias.
    """
    p = complex(p)
    margin = 0.02
    if abs(p) >= 1.0 - margin:
        raise ConfigurationError("phase critical point must be interior to the disk")
    if psi_target <= 0:
        raise ConfigurationError("psi_target must be positive")
    rng = np.random.default_rng(seed)
    last_report = None
    for attempt in range(max_retries):
        bias = None
        if attempt > 0:
            angle = float(rng.uniform(0.0, TWO_PI))
            bias = (p, 2, 3.0 * np.exp(1j * angle))
        if domain.gamma0 is None:
            base = np.zeros(max(degree + 1, 3), dtype=complex)
            c2 = 1.0 if bias is None else bias[2] / 2.0
            # (z-p)^2 * c2 + i expanded in powers of z
            base[0] = 1j + c2 * p * p
            base[1] = -2.0 * c2 * p
            base[2] = c2
            phi = HoloFunction(base)
            phi.meta["arc_residual"] = 0.0
        else:
            target = 0.8 * residual_tol / psi_target
            lo, hi = 1e-9, 1e-2  # residual grows with the penalty weight mu
            fn_lo, res_lo = _phase_candidate(domain, p, degree, lo, bias)
            if res_lo > target:
                raise InfeasibleDegreeError(
                    f"arc residual {res_lo:.2e} exceeds {target:.1e} even without "
                    f"gradient penalty at degree {degree}; increase the degree"
                )
            phi, best_res = fn_lo, res_lo
            for _ in range(14):
                mid = np.sqrt(lo * hi)
                fn_mid, res_mid = _phase_candidate(domain, p, degree, mid, bias)
                if res_mid <= target:
                    lo, phi, best_res = mid, fn_mid, res_mid
                else:
                    hi = mid
            phi.meta["arc_residual"] = best_res * psi_target
        phi = HoloFunction(psi_target * phi.coeffs, meta=phi.meta)
        report = find_critical_points(phi, domain, seed=seed + attempt)
        last_report = report
        ours = [q for q in report.points if abs(q.location - p) < 1e-8]
        if report.is_morse and ours and not ours[0].degenerate:
            circle = np.exp(1j * np.linspace(0.0, TWO_PI, 2048, endpoint=False))
            phi.meta["critical_points"] = report
            phi.meta["hessian"] = complex(phi.derivative(2)(p))
            phi.meta["max_gradient"] = float(np.max(np.abs(phi.derivative()(circle))))
            return phi
    raise MorseVerificationError(
        f"no Morse phase after {max_retries} retries; last report: {last_report}"
    )


def build_amplitude(
    report: CriticalPointReport,
    p: complex,
    domain: DiskDomain,
    vanish_order: int = 4,
    degree: int = 16,
) -> HoloFunction:
    """Holomorphic amplitude: a(p)=1, zeros of order vanish_order at other
    critical points, Re a = 0 on gamma0."""
    p = complex(p)
    if not any(abs(q.location - p) < 1e-8 for q in report.points):
        raise ValueError("p is not among the report's critical points")
    constraints = [(p, 0, 1.0 + 0.0j)]
    for q in report.secondary(p):
        for order in range(vanish_order):
            constraints.append((q.location, order, 0.0j))
    if 2 * len(constraints) >= 2 * (degree + 1):
        raise InfeasibleDegreeError(
            f"{len(constraints)} hard constraints need degree > {len(constraints) - 1}"
        )
    return fit_holomorphic_on_arc(constraints, domain, degree, part="re")


def field_jets(values, mesh: Mesh, z0: complex, order: int = 2) -> np.ndarray:
    """d/dz jets (orders 0..order) of a discrete complex field at z0.

    Local least-squares bivariate polynomial of degree order+2 over the
    vertices within radius 4*resolution (the wide centered stencil), then
    Wirtinger combinations of the Taylor coefficients.
    """
    z0 = complex(z0)
    radius = 4.0 * mesh.resolution
    deg = order + 2
    sel = np.abs(mesh.vertices - z0) <= radius
    n_terms = (deg + 1) * (deg + 2) // 2
    if np.count_nonzero(sel) < 2 * n_terms:
        raise ConfigurationError(
            "jet stencil too coarse at this resolution; refine the mesh"
        )
    dx = (mesh.vertices[sel] - z0).real / radius
    dy = (mesh.vertices[sel] - z0).imag / radius
    cols, idx = [], {}
    for total in range(deg + 1):
        for i in range(total + 1):
            j = total - i
            idx[(i, j)] = len(cols)
            cols.append(dx**i * dy**j)
    A = np.column_stack(cols)
    f = np.asarray(values, dtype=complex)[sel]
    coef, _, rank, _ = np.linalg.lstsq(A, f, rcond=None)
    if rank < n_terms:
        raise ConfigurationError("jet stencil rank-deficient; refine the mesh")

    def c(i, j):  # Taylor derivative d_x^i d_y^j f(z0)
        fact = float(factorial(i) * factorial(j))
        return coef[idx[(i, j)]] * fact / radius ** (i + j)

    jets = [c(0, 0)]
    if order >= 1:
        jets.append(0.5 * (c(1, 0) - 1j * c(0, 1)))
    if order >= 2:
        jets.append(0.25 * (c(2, 0) - c(0, 2) - 2j * c(1, 1)))
    if order >= 3:
        jets.append(0.125 * (c(3, 0) - 3 * c(1, 2) - 1j * (3 * c(2, 1) - c(0, 3))))
    return np.asarray(jets[: order + 1])


def build_jet_form(
    theta_values,
    mesh: Mesh,
    report: CriticalPointReport,
    p: complex,
    domain: DiskDomain,
    degree: int = 16,
) -> HoloFunction:
    """Holomorphic f, real on gamma0, whose derivative omega = df matches the
    0th-2nd d/dz jets of theta at every secondary critical point and the 0th
    jet at p."""
    p = complex(p)
    constraints = []
    jp = field_jets(theta_values, mesh, p, order=0)
    constraints.append((p, 1, complex(jp[0])))
    for q in report.secondary(p):
        jq = field_jets(theta_values, mesh, q.location, order=2)
        for ell in range(3):
            constraints.append((q.location, ell + 1, complex(jq[ell])))
    if 2 * len(constraints) >= 2 * degree:
        raise InfeasibleDegreeError(
            f"{len(constraints)} jet constraints need degree > {len(constraints)}"
        )
    fn = fit_holomorphic_on_arc(constraints, domain, degree, part="im")
    # verify the jets of omega = f' directly
    omega = fn.derivative()
    for z0, order, t in constraints:
        got = fn.derivative(order)(z0)
        if abs(got - t) > 1e-6 * max(1.0, abs(t)):
            raise InfeasibleDegreeError("jet reproduction failed verification")
    fn.meta["omega"] = omega
    return fn
