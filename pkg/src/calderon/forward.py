"""P1 finite-element Schrodinger solves and partial Cauchy data on the disk.

The weak form of the positive Laplacian is conformally invariant in 2D, so
the stiffness matrix is the plain Euclidean one; the metric enters only
through the (lumped) mass weights e^{2*rho}.  Neumann traces are recovered
from the weak residual (boundary flux recovery), which keeps the Green
identity between boundary pairings and interior integrals tight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import GAMMA, GAMMA0, Mesh, ScalarField, as_values, boundary_integral


class DirichletEigenvalueError(RuntimeError):
    """The discrete operator Delta_g + V is (near-)singular."""


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    v, c = mesh.vertices, mesh.cells
    x = v.real[c]
    y = v.imag[c]
    n = mesh.n_vertices
    rows, cols, data = [], [], []
    # gradients of barycentric coordinates
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    inv4a = 1.0 / (4.0 * mesh.cell_areas)
    for i in range(3):
        for j in range(3):
            rows.append(c[:, i])
            cols.append(c[:, j])
            data.append((bx[:, i] * bx[:, j] + by[:, i] * by[:, j]) * inv4a)
    K = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return K.tocsr()


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Diagonal of the lumped mass matrix with the metric weight e^{2*rho}."""
    return mesh.vertex_areas * np.exp(2.0 * mesh.rho_v)


@dataclass
class CauchyData:
    """Dirichlet/Neumann traces on the accessible arc gamma.

    The Dirichlet datum is implicitly extended by zero on gamma0.
    """

    mesh: Mesh
    dirichlet_trace: np.ndarray  # values at gamma vertices (mesh.gamma_indices order)
    neumann_trace: np.ndarray

    def __post_init__(self):
        ng = len(self.mesh.gamma_indices())
        if len(self.dirichlet_trace) != ng or len(self.neumann_trace) != ng:
            raise ValueError("traces must live on exactly the gamma vertices")

    def to_csv(self, path):
        idx = self.mesh.gamma_indices()
        theta_all = np.full(self.mesh.n_vertices, np.nan)
        theta_all[self.mesh.boundary] = self.mesh.boundary_theta()
        with open(path, "w") as fh:
            fh.write("theta,dirichlet_re,dirichlet_im,neumann_re,neumann_im,arc_label\n")
            for k, i in enumerate(idx):
                d = complex(self.dirichlet_trace[k])
                nn = complex(self.neumann_trace[k])
                fh.write(
                    f"{float(theta_all[i])!r},{d.real!r},{d.imag!r},{nn.real!r},{nn.imag!r},{GAMMA}\n"
                )

    @classmethod
    def from_csv(cls, path, mesh: Mesh) -> "CauchyData":
        theta, dr, di, nr, ni = [], [], [], [], []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            expected = ["theta", "dirichlet_re", "dirichlet_im", "neumann_re", "neumann_im", "arc_label"]
            if header != expected:
                raise ValueError(f"unexpected Cauchy data header {header}")
            for line in fh:
                parts = line.strip().split(",")
                if parts[-1] != GAMMA:
                    raise ValueError(f"unexpected arc label {parts[-1]!r}")
                theta.append(float(parts[0]))
                dr.append(float(parts[1]))
                di.append(float(parts[2]))
                nr.append(float(parts[3]))
                ni.append(float(parts[4]))
        theta = np.asarray(theta)
        mesh_theta = mesh.boundary_theta()[~mesh.boundary_is_gamma0]
        order = np.argsort(theta)
        if not np.allclose(np.sort(mesh_theta), theta[order], atol=1e-9):
            raise ValueError("Cauchy data angles do not match the mesh gamma vertices")
        # reorder rows into mesh gamma order
        perm = order[np.searchsorted(theta[order], mesh_theta)]
        d = (np.asarray(dr) + 1j * np.asarray(di))[perm]
        nn = (np.asarray(nr) + 1j * np.asarray(ni))[perm]
        if np.allclose(d.imag, 0) and np.allclose(nn.imag, 0):
            d, nn = d.real, nn.real
        return cls(mesh, d, nn)


class SchrodingerOperator:
    """Assembled (Delta_g + V) with a factorized interior block.

    The factorization is immutable; solves with many right-hand sides can
    share one instance.
    """

    def __init__(self, mesh: Mesh, V=0.0, name: str = "V"):
        self.mesh = mesh
        self.name = name
        self.V = as_values(V, mesh)
        self.K = stiffness_matrix(mesh)
        self.mass = lumped_mass(mesh)
        self.A = (self.K + sp.diags(self.V * self.mass)).tocsc()
        ii = np.where(mesh.interior)[0]
        self.int_idx = ii
        self.bnd_idx = mesh.boundary
        A_ii = self.A[np.ix_(ii, ii)]
        try:
            self.lu = spla.splu(A_ii.tocsc())
        except RuntimeError as exc:
            raise DirichletEigenvalueError(
                f"discrete Delta_g + {self.name} is singular (Dirichlet eigenvalue)"
            ) from exc
        self._check_conditioning(A_ii)
        self.A_ib = self.A[np.ix_(ii, mesh.boundary)]

    def _check_conditioning(self, A_ii, limit=1e12):
        n = A_ii.shape[0]
        # A_ii is symmetric, so the adjoint solve is the same solve
        op = spla.LinearOperator((n, n), matvec=self.lu.solve, rmatvec=self.lu.solve)
        inv_norm = spla.onenormest(op)
        cond = inv_norm * spla.norm(A_ii, 1)
        if not np.isfinite(cond) or cond > limit:
            raise DirichletEigenvalueError(
                f"discrete Delta_g + {self.name} is near-singular "
                f"(condition estimate {cond:.2e}); 0 is close to a Dirichlet eigenvalue"
            )

    def _solve_interior(self, rhs_int: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(rhs_int):
            return self.lu.solve(rhs_int.real) + 1j * self.lu.solve(rhs_int.imag)
        return self.lu.solve(rhs_int)

    def solve_dirichlet(self, boundary_values: np.ndarray, source=None) -> np.ndarray:
        """(Delta_g + V) u = source in the interior, u = boundary_values on the circle."""
        g = np.asarray(boundary_values)
        if g.shape != (len(self.bnd_idx),):
            raise ValueError("boundary data must have one value per boundary vertex")
        rhs = -self.A_ib @ g
        if source is not None:
            f = as_values(source, self.mesh)
            rhs = rhs + (self.mass * f)[self.int_idx]
        dtype = complex if (np.iscomplexobj(rhs)) else float
        u = np.zeros(self.mesh.n_vertices, dtype=dtype)
        u[self.int_idx] = self._solve_interior(rhs)
        u[self.bnd_idx] = g
        return u

    def weak_neumann_trace(self, u: np.ndarray, source=None) -> np.ndarray:
        """Exterior metric normal derivative at boundary vertices by flux recovery.

        Solves sum_j B_ij t_j = (A u - M f)_i restricted to boundary rows,
        with the lumped boundary mass B.
        """
        r = self.A @ u
        if source is not None:
            r = r - self.mass * as_values(source, self.mesh)
        return r[self.bnd_idx] / self.mesh.boundary_weights


def solve_schrodinger_dirichlet(mesh: Mesh, V, f_boundary) -> ScalarField:
    """Solution of (Delta_g + V) u = 0 with full Dirichlet data f_boundary."""
    op = SchrodingerOperator(mesh, V)
    u = op.solve_dirichlet(np.asarray(f_boundary))
    return ScalarField(mesh, u)


def green_apply(mesh: Mesh, V, f) -> ScalarField:
    """Green operator with Dirichlet condition: (Delta_g + V) u = f, u|_boundary = 0."""
    op = SchrodingerOperator(mesh, V)
    u = op.solve_dirichlet(np.zeros(len(mesh.boundary)), source=f)
    return ScalarField(mesh, u)


def partial_cauchy_data(mesh: Mesh, V, f_on_gamma) -> CauchyData:
    """Solve with Dirichlet data f on gamma and 0 on gamma0; return traces on gamma."""
    f_on_gamma = np.asarray(f_on_gamma)
    op = SchrodingerOperator(mesh, V)
    g = np.zeros(len(mesh.boundary), dtype=f_on_gamma.dtype)
    g[~mesh.boundary_is_gamma0] = f_on_gamma
    u = op.solve_dirichlet(g)
    neumann = op.weak_neumann_trace(u)[~mesh.boundary_is_gamma0]
    return CauchyData(mesh, f_on_gamma, neumann)


def boundary_pairing(mesh: Mesh, u1_traces, u2_traces) -> complex:
    """Signed pairing over the whole boundary of two solutions' traces.

    Arguments are (dirichlet, neumann) pairs on all boundary vertices, with
    the exterior normal convention.  For solutions of (Delta_g + V_i) u_i = 0
    this equals the interior integral of u1 (V1 - V2) u2 by Green's theorem.
    """
    f1, dn1 = (np.asarray(a) for a in u1_traces)
    f2, dn2 = (np.asarray(a) for a in u2_traces)
    integrand = dn1 * f2 - f1 * dn2
    val, _ = boundary_integral(integrand, mesh, "full")
    return val
