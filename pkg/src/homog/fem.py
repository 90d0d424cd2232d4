"""Small nonlinear plane-stress FEM for RVE experiments.

4-node isoparametric quadrilaterals with 2x2 Gauss quadrature, small
strain.  Boundary conditions are Dirichlet displacements; the RVE drives
prescribe the affine map of a boundary strain on every boundary node
(zero boundary displacement fluctuations).  The solver runs Newton with
the finite-difference constitutive tangent and bisects the load increment
on divergence.

Meshes index nodes from 0.  The text mesh format is line oriented:
node count, one "x y" line per node, element count, one
"n1 n2 n3 n4 mat_id" line per element (counter-clockwise connectivity).
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DivergedError, GeometryError
from .damage import plane_stress_elasticity

BRICK_ID = 0
MORTAR_ID = 1
MATERIAL_NAMES = {BRICK_ID: "brick", MORTAR_ID: "mortar"}

_G = 1.0 / np.sqrt(3.0)
_GAUSS = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
_XI_N = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


@dataclass
class Mesh:
    nodes: np.ndarray          # (nn, 2) coordinates
    elements: np.ndarray       # (ne, 4) connectivity, counter-clockwise
    material_id: np.ndarray    # (ne,) int
    thickness: float = 1.0

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def bounding_box(self):
        return self.nodes.min(axis=0), self.nodes.max(axis=0)


@dataclass
class BoundaryDrive:
    """Unit boundary strain direction scaled up to lambda_max in `steps`
    uniform increments."""

    eps: np.ndarray
    lambda_max: float
    steps: int

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        n = np.linalg.norm(self.eps)
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"drive direction must be unit norm, got {n}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class FieldState:
    """Nodal displacements plus per-Gauss-point history and stress."""

    u: np.ndarray         # (2*nn,)
    gp_state: np.ndarray  # (ne*4, 4) damage state columns (r_t, r_c, d_t, d_c)
    gp_stress: np.ndarray  # (ne*4, 3)


class ElasticLaw:
    """Linear elastic material with the same batch interface as DamageLaw."""

    def __init__(self, E, nu):
        self.E, self.nu = E, nu
        self.elasticity = plane_stress_elasticity(E, nu)

    def virgin_state(self, n):
        return np.zeros((n, 4))

    def integrate(self, eps, state):
        return np.asarray(eps) @ self.elasticity.T, state

    def tangent(self, eps, state, h=None):
        return np.broadcast_to(self.elasticity,
                               (len(eps), 3, 3)).copy()

    def secant(self, eps, state):
        return self.tangent(eps, state)


# ---------------------------------------------------------------------------
# Mesh generation: Flemish bond RVE
# ---------------------------------------------------------------------------

def _merge_cuts(cuts, span):
    cuts = sorted(set(cuts) | {0.0, span})
    merged = [cuts[0]]
    tol = 1e-9 * span
    for c in cuts[1:]:
        if c - merged[-1] > tol:
            merged.append(c)
    merged[-1] = span
    return merged


def _subdivide(bounds, joint, resolution, brick_cell_factor):
    """Insert interior points so joints carry `resolution` cells and wider
    (brick) intervals cells of about brick_cell_factor joint sizes."""
    h_joint = joint / resolution
    h_brick = brick_cell_factor * h_joint
    out = [bounds[0]]
    for a, b in zip(bounds[:-1], bounds[1:]):
        width = b - a
        target = h_joint if width <= joint * (1.0 + 1e-9) else h_brick
        n = max(1, int(np.ceil(width / target - 1e-9)))
        out.extend(a + width * (i + 1) / n for i in range(n))
    return np.array(out)


def generate_flemish_rve(brick_size=(0.25, 0.055), joint_thickness=0.01,
                         courses=2, resolution=1, periods=1,
                         brick_cell_factor=2.0, thickness=1.0):
    """Conforming quad mesh of a Flemish bond RVE.

    Each course alternates stretchers of length brick_size[0] and headers
    of length (brick_size[0] - joint)/2, separated by head joints; a bed
    joint tops every course, and consecutive courses shift by half a
    period so header centres align with stretcher centres.  The default
    dimensions are generator assumptions (a 250x120x55 mm brick with
    10 mm joints), not reference measurements.
    """
    ls, hb = float(brick_size[0]), float(brick_size[1])
    t = float(joint_thickness)
    if min(ls, hb, t) <= 0.0 or courses < 1 or periods < 1 or resolution < 1:
        raise GeometryError("geometry parameters must be positive")
    lh = (ls - t) / 2.0
    if lh <= 0.0:
        raise GeometryError(
            f"header length (brick {ls} - joint {t})/2 must be positive")

    period = ls + t + lh + t
    width, height = periods * period, courses * (hb + t)

    base = [0.0, ls, ls + t, ls + t + lh]
    parities = {c % 2 for c in range(courses)}
    cuts = []
    for k in range(periods):
        for c in base:
            for par in parities:
                cuts.append(k * period + (c + par * period / 2.0) % period)
    xs = _subdivide(_merge_cuts(cuts, width), t, resolution,
                    brick_cell_factor)

    ycuts = []
    for c in range(courses):
        ycuts.extend([c * (hb + t), c * (hb + t) + hb])
    ys = _subdivide(_merge_cuts(ycuts, height), t, resolution,
                    brick_cell_factor)

    nx, ny = len(xs) - 1, len(ys) - 1
    xg, yg = np.meshgrid(xs, ys)
    nodes = np.column_stack([xg.ravel(), yg.ravel()])

    def node(ix, iy):
        return iy * (nx + 1) + ix

    elements = np.empty((nx * ny, 4), dtype=int)
    materials = np.empty(nx * ny, dtype=int)
    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    e = 0
    for iy in range(ny):
        course = int(yc[iy] // (hb + t))
        in_bed = (yc[iy] - course * (hb + t)) > hb
        shift = (course % 2) * period / 2.0
        for ix in range(nx):
            elements[e] = (node(ix, iy), node(ix + 1, iy),
                           node(ix + 1, iy + 1), node(ix, iy + 1))
            if in_bed:
                materials[e] = MORTAR_ID
            else:
                xx = (xc[ix] - shift) % period
                in_head = (ls <= xx < ls + t) or (xx >= ls + t + lh)
                materials[e] = MORTAR_ID if in_head else BRICK_ID
            e += 1
    return Mesh(nodes=nodes, elements=elements, material_id=materials,
                thickness=thickness)


def mesh_volume_fractions(mesh):
    """Area fraction per material id."""
    areas = element_areas(mesh)
    total = areas.sum()
    return {int(m): float(areas[mesh.material_id == m].sum() / total)
            for m in np.unique(mesh.material_id)}


# ---------------------------------------------------------------------------
# Mesh I/O
# ---------------------------------------------------------------------------

def mesh_text(mesh):
    lines = [str(mesh.n_nodes)]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    lines.append(str(mesh.n_elements))
    lines += [f"{a} {b} {c} {d} {m}" for (a, b, c, d), m
              in zip(mesh.elements, mesh.material_id)]
    return "\n".join(lines) + "\n"


def save_mesh(mesh, path):
    text = mesh_text(mesh)
    with open(path, "w") as f:
        f.write(text)
    return text


def load_mesh(path, thickness=1.0):
    with open(path) as f:
        tokens = f.read().split("\n")
    pos = 0
    nn = int(tokens[pos]); pos += 1
    nodes = np.array([[float(v) for v in tokens[pos + i].split()]
                      for i in range(nn)])
    pos += nn
    ne = int(tokens[pos]); pos += 1
    rows = [tokens[pos + i].split() for i in range(ne)]
    elements = np.array([[int(v) for v in r[:4]] for r in rows])
    materials = np.array([int(r[4]) for r in rows])
    return Mesh(nodes=nodes, elements=elements, material_id=materials,
                thickness=thickness)


def mesh_hash(mesh):
    return hashlib.sha256(mesh_text(mesh).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

def _shape_gradients():
    """dN/dxi at the 4 Gauss points, shape (4 gp, 4 nodes, 2)."""
    dN = np.empty((4, 4, 2))
    for g, (xi, eta) in enumerate(_GAUSS):
        for n, (xn, yn) in enumerate(_XI_N):
            dN[g, n, 0] = 0.25 * xn * (1.0 + yn * eta)
            dN[g, n, 1] = 0.25 * yn * (1.0 + xn * xi)
    return dN


_DN = _shape_gradients()


def element_kinematics(mesh):
    """B matrices (ne, 4, 3, 8), Jacobian determinants (ne, 4) and element
    areas (ne,) for all elements."""
    coords = mesh.nodes[mesh.elements]            # (ne, 4, 2)
    jac = np.einsum('gna,enb->egab', _DN, coords)
    detj = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(detj <= 0.0):
        raise GeometryError("non-positive Jacobian in mesh")
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1]
    inv[..., 1, 1] = jac[..., 0, 0]
    inv[..., 0, 1] = -jac[..., 0, 1]
    inv[..., 1, 0] = -jac[..., 1, 0]
    inv /= detj[..., None, None]
    dndx = np.einsum('egab,gnb->egna', inv, _DN)  # (ne, 4gp, 4n, 2)
    ne = mesh.n_elements
    B = np.zeros((ne, 4, 3, 8))
    B[:, :, 0, 0::2] = dndx[..., 0]
    B[:, :, 1, 1::2] = dndx[..., 1]
    B[:, :, 2, 0::2] = dndx[..., 1]
    B[:, :, 2, 1::2] = dndx[..., 0]
    areas = detj.sum(axis=1)                      # unit Gauss weights
    return B, detj, areas


def element_areas(mesh):
    return element_kinematics(mesh)[2]


def characteristic_lengths(mesh):
    """Per-element size sqrt(area) and their mean, the RSE length."""
    lengths = np.sqrt(element_areas(mesh))
    return lengths, float(lengths.mean())


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

def boundary_node_ids(mesh, tol=1e-9):
    lo, hi = mesh.bounding_box()
    scale = max(hi - lo)
    on = np.any((np.abs(mesh.nodes - lo) < tol * scale)
                | (np.abs(mesh.nodes - hi) < tol * scale), axis=1)
    return np.flatnonzero(on)


def apply_boundary_strain(mesh, eps, t):
    """Affine Dirichlet set for boundary strain eps scaled by t.

    eps carries engineering shear; the affine map uses the tensor
    component, d = [exx*x + (g/2)*y, eyy*y + (g/2)*x] * t.  Returns
    (dof indices, prescribed values).
    """
    eps = np.asarray(eps, dtype=float)
    ids = boundary_node_ids(mesh)
    x, y = mesh.nodes[ids, 0], mesh.nodes[ids, 1]
    exy = 0.5 * eps[2]
    dx = (eps[0] * x + exy * y) * t
    dy = (eps[1] * y + exy * x) * t
    dofs = np.concatenate([2 * ids, 2 * ids + 1])
    vals = np.concatenate([dx, dy])
    return dofs, vals


def affine_field(mesh, eps, t):
    """Affine displacement of *all* nodes for boundary strain eps at t.

    Used as the Newton predictor for RVE drives: interior nodes start on
    the zero-fluctuation field instead of lagging behind the boundary.
    """
    eps = np.asarray(eps, dtype=float)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    exy = 0.5 * eps[2]
    u = np.empty(2 * mesh.n_nodes)
    u[0::2] = (eps[0] * x + exy * y) * t
    u[1::2] = (eps[1] * y + exy * x) * t
    return u


# ---------------------------------------------------------------------------
# Nonlinear solution
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    tol: float = 1e-6          # residual vs reaction reference norm
    max_iter: int = 12         # full Newton budget per increment
    relax_max_iter: int = 150  # crack-relaxation budget per increment
    newton_switch: float = 1e-3  # relaxation residual at which Newton resumes
    max_bisect: int = 8
    failure_drop: float = 0.05  # stop when |stress| falls below this x peak
    min_steps_before_failure: int = 3


class RveModel:
    """One mesh with material laws bound to its element material ids.

    Owns the precomputed kinematics and provides assembly, Newton solves
    and stress up-scaling.  A model instance is stateless with respect to
    the loading: all history lives in FieldState.
    """

    def __init__(self, mesh, laws):
        missing = set(np.unique(mesh.material_id)) - set(laws)
        if missing:
            raise KeyError(f"no law bound for material ids {sorted(missing)}")
        self.mesh = mesh
        self.laws = dict(laws)
        self.B, self.detj, self.areas = element_kinematics(mesh)
        self.total_area = float(self.areas.sum())
        self.dofmap = np.empty((mesh.n_elements, 8), dtype=int)
        self.dofmap[:, 0::2] = 2 * mesh.elements
        self.dofmap[:, 1::2] = 2 * mesh.elements + 1
        self.groups = {int(m): np.flatnonzero(mesh.material_id == m)
                       for m in np.unique(mesh.material_id)}
        self.wdet = self.detj * mesh.thickness      # unit Gauss weights
        # force scale for absolute convergence floors
        e_ref = max(law.elasticity[0, 0] for law in self.laws.values())
        _, l_rse = characteristic_lengths(mesh)
        self.force_floor = 1e-14 * e_ref * mesh.thickness * l_rse

    def virgin_field(self):
        ne = self.mesh.n_elements
        state = np.zeros((ne * 4, 4))
        for m, idx in self.groups.items():
            gp = (idx[:, None] * 4 + np.arange(4)).ravel()
            state[gp] = self.laws[m].virgin_state(len(gp))
        return FieldState(u=np.zeros(2 * self.mesh.n_nodes),
                          gp_state=state, gp_stress=np.zeros((ne * 4, 3)))

    def gp_strains(self, u):
        ue = u[self.dofmap]                              # (ne, 8)
        return np.einsum('egij,ej->egi', self.B, ue)     # (ne, 4, 3)

    def _per_group(self, fn, eps, state):
        """Apply a law method group-wise over flattened Gauss points."""
        out = {}
        for m, idx in self.groups.items():
            gp = (idx[:, None] * 4 + np.arange(4)).ravel()
            out[m] = (gp, fn(self.laws[m], eps.reshape(-1, 3)[gp], state[gp]))
        return out

    def stresses(self, u, state):
        """Stress and trial state at all Gauss points for displacements u,
        starting from the committed state."""
        eps = self.gp_strains(u)
        sig = np.empty((self.mesh.n_elements * 4, 3))
        new = np.empty_like(state)
        for m, (gp, res) in self._per_group(
                lambda law, e, s: law.integrate(e, s), eps, state).items():
            sig[gp], new[gp] = res
        return sig, new

    def internal_force(self, gp_stress):
        sw = gp_stress.reshape(self.mesh.n_elements, 4, 3) \
            * self.wdet[..., None]
        fe = np.einsum('egki,egk->ei', self.B, sw)
        f = np.zeros(2 * self.mesh.n_nodes)
        np.add.at(f, self.dofmap, fe)
        return f

    def stiffness(self, u, state, secant=False):
        eps = self.gp_strains(u)
        D = np.empty((self.mesh.n_elements * 4, 3, 3))
        method = (lambda law, e, s: law.secant(e, s)) if secant \
            else (lambda law, e, s: law.tangent(e, s))
        for m, (gp, res) in self._per_group(method, eps, state).items():
            D[gp] = res
        Dw = D.reshape(self.mesh.n_elements, 4, 3, 3) \
            * self.wdet[..., None, None]
        ke = np.einsum('egki,egkl,eglj->eij', self.B, Dw, self.B)
        rows = np.repeat(self.dofmap, 8, axis=1).ravel()
        cols = np.tile(self.dofmap, (1, 8)).ravel()
        n = 2 * self.mesh.n_nodes
        return sp.coo_matrix((ke.ravel(), (rows, cols)),
                             shape=(n, n)).tocsr()

    def upscale(self, gp_stress):
        """Mean up-scaled stress: area-weighted element averages."""
        per_el = gp_stress.reshape(self.mesh.n_elements, 4, 3).mean(axis=1)
        return (self.areas[:, None] * per_el).sum(axis=0) / self.total_area

    def solve_increment(self, field, dofs, vals, config=None, ref_force=0.0,
                        guess=None):
        """Newton solve to equilibrium under prescribed displacements.

        ``guess`` optionally seeds the full displacement vector (its
        prescribed entries are overwritten).  Returns a new FieldState and
        an info dict; raises DivergedError when max_iter is exhausted (no
        bisection at this level).
        """
        cfg = config or SolverConfig()
        start = (guess if guess is not None else field.u).copy()
        start[dofs] = vals
        free = np.ones(len(start), dtype=bool)
        free[dofs] = False

        def converged(res, ref):
            return res <= max(cfg.tol * ref, self.force_floor)

        # phase 1: full Newton on the committed state
        u = start.copy()
        iters = 0
        for _ in range(cfg.max_iter):
            sig, new_state = self.stresses(u, field.gp_state)
            f = self.internal_force(sig)
            res = np.linalg.norm(f[free])
            ref = max(np.linalg.norm(f[~free]), ref_force)
            if converged(res, ref):
                return (FieldState(u=u, gp_state=new_state, gp_stress=sig),
                        {"iterations": iters, "residual": res,
                         "reference": ref, "reactions": f[~free]})
            K = self.stiffness(u, field.gp_state, secant=False)
            u[free] += spla.spsolve(K[free][:, free].tocsc(), -f[free])
            iters += 1

        # phase 2: crack relaxation.  Newton cycles when a crack snaps
        # through at fixed boundary amplitude; committing the (monotone)
        # damage growth between exact-secant sweeps walks deterministically
        # to the post-jump equilibrium, and full Newton polishes once the
        # residual is small.  Committing mid-increment is equivalent to
        # refining the amplitude schedule, which bisection alone cannot do
        # across a snap-through.
        u = start.copy()
        state = field.gp_state.copy()
        newton = False
        for _ in range(cfg.relax_max_iter):
            sig, state = self.stresses(u, state)
            f = self.internal_force(sig)
            res = np.linalg.norm(f[free])
            ref = max(np.linalg.norm(f[~free]), ref_force)
            if converged(res, ref):
                return (FieldState(u=u, gp_state=state, gp_stress=sig),
                        {"iterations": iters, "residual": res,
                         "reference": ref, "reactions": f[~free]})
            newton = newton or res <= cfg.newton_switch * ref
            K = self.stiffness(u, state, secant=not newton)
            u[free] += spla.spsolve(K[free][:, free].tocsc(), -f[free])
            iters += 1
        raise DivergedError(
            f"no convergence in {iters} iterations "
            f"(residual {res:.3e}, reference {ref:.3e})")


@dataclass
class AnalysisHistory:
    """Per-increment record of one RVE experiment."""

    t: np.ndarray            # amplitudes lambda, strictly increasing
    strain: np.ndarray       # (n, 3) boundary strain = direction * t
    stress: np.ndarray       # (n, 3) up-scaled stress
    diverged: bool = False
    failed: bool = False     # failure criterion reached
    field: FieldState = None


def run_analysis(model, drive, config=None):
    """Drive the RVE with the boundary strain program until failure,
    divergence or the amplitude cap.

    Records are made exactly at the uniform amplitude grid; bisection
    sub-steps are internal.  Diverged runs return the partial history
    flagged, raising only if the first increment itself fails.
    """
    cfg = config or SolverConfig()
    mesh = model.mesh
    field = model.virgin_field()
    targets = np.linspace(0.0, drive.lambda_max, drive.steps + 1)[1:]
    udofs, unit_vals = apply_boundary_strain(mesh, drive.eps, 1.0)
    unit_affine = affine_field(mesh, drive.eps, 1.0)

    ts, strains, stresses = [], [], []
    peak = 0.0
    ref_force = 0.0
    lam = 0.0
    diverged = failed = False
    for target in targets:
        n_bisect = 0
        dt = target - lam
        while lam < target - 1e-15 * drive.lambda_max:
            sub_target = min(lam + dt, target)
            try:
                guess = field.u + (sub_target - lam) * unit_affine
                new_field, info = model.solve_increment(
                    field, udofs, sub_target * unit_vals, cfg, ref_force,
                    guess=guess)
            except DivergedError:
                n_bisect += 1
                if n_bisect > cfg.max_bisect:
                    diverged = True
                    break
                dt /= 2.0
                continue
            field = new_field
            lam = sub_target
            ref_force = max(ref_force, info["reference"])
        if diverged:
            break
        sig = model.upscale(field.gp_stress)
        ts.append(lam)
        strains.append(lam * drive.eps)
        stresses.append(sig)
        norm = np.linalg.norm(sig)
        peak = max(peak, norm)
        if (len(ts) >= cfg.min_steps_before_failure
                and norm < cfg.failure_drop * peak):
            failed = True
            break
    if diverged and not ts:
        raise DivergedError("divergence in the first increment")
    return AnalysisHistory(t=np.array(ts), strain=np.array(strains),
                           stress=np.array(stresses), diverged=diverged,
                           failed=failed, field=field)


def solve_increment(mesh, field, bc, laws, config=None):
    """One equilibrium solve on a mesh (spec-shaped convenience wrapper).

    ``bc`` is a (dofs, values) pair of absolute prescribed displacements.
    """
    model = RveModel(mesh, laws)
    dofs, vals = bc
    new_field, _ = model.solve_increment(field, np.asarray(dofs, dtype=int),
                                         np.asarray(vals, dtype=float),
                                         config)
    return new_field


def upscale_stress(mesh, field, laws=None):
    """Mean up-scaled stress vector of a converged field on a mesh."""
    B, detj, areas = element_kinematics(mesh)
    per_el = field.gp_stress.reshape(mesh.n_elements, 4, 3).mean(axis=1)
    return (areas[:, None] * per_el).sum(axis=0) / areas.sum()
