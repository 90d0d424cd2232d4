"""Tension/compression (d+/d-) isotropic continuum damage law.

The model works on plane-stress Voigt vectors (see `homog.voigt` for the
conventions).  Effective stress is elastic, it is split spectrally into a
tensile and a compressive part, two scalar equivalent stresses drive two
monotone thresholds, and two scalar damage variables degrade the split
parts independently:

    sigma = (1 - d_t) * s_pos + (1 - d_c) * s_neg

Tension softens exponentially; compression hardens and softens along a
chain of three quadratic Bezier segments ending in a residual plateau.
Both damage curves are regularized so the energy dissipated at a point of
characteristic length ``l`` is the fracture energy density ``G/l``.

All stateful entry points exist in two flavours: scalar ones operating on
a single material point (`DamageState`) and batch ones operating on
arrays of shape (n, ...) used by the FEM solver and the calibration
replay.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import (InvalidElasticError, InvalidParamsError,
                     OutOfSegmentError, SnapBackError)
from .voigt import heaviside, invariants, macaulay, principal_values, \
    spectral_split

# Clamp keeping the secant operator non-negative for exhausted points.
_D_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class MaterialParams:
    """Full parameter set of the damage law for one material.

    Stresses in Pa, fracture energies in N/m (J/m^2), strains and shape
    factors dimensionless.  ``ft`` is both the tension onset and peak
    (no tensile hardening).
    """

    E: float       # Young modulus
    nu: float      # Poisson ratio
    ft: float      # tensile strength f0+ = fp+
    Gt: float      # tensile fracture energy per unit area
    f0c: float     # compression damage onset stress f0-
    fpc: float     # compression peak stress fp-
    frc: float     # compression residual stress fr-
    epc: float     # strain at the compression peak ep-
    Gc: float      # compressive fracture energy per unit area
    kb: float      # biaxial/uniaxial compression strength ratio
    kappa: float   # shear-compression reduction factor
    c1: float      # Bezier controller, onset-to-peak stress
    c2: float      # Bezier controller, softening knee stress
    c3: float      # Bezier controller, post-peak strain spread

    def validate(self):
        checks = [
            (self.E > 0.0, "E must be positive"),
            (0.0 <= self.nu < 0.5, "nu must lie in [0, 0.5)"),
            (self.ft > 0.0, "ft must be positive"),
            (self.Gt > 0.0, "Gt must be positive"),
            (0.0 < self.f0c <= self.fpc, "need 0 < f0c <= fpc"),
            (0.0 < self.frc <= self.fpc, "need 0 < frc <= fpc"),
            (self.epc > self.f0c / self.E, "epc must exceed f0c/E"),
            (self.Gc > 0.0, "Gc must be positive"),
            (self.kb > 1.0, "kb must exceed 1"),
            (self.kappa >= 0.0, "kappa must be non-negative"),
            (self.c1 > 0.0 and self.c2 > 0.0 and self.c3 > 0.0,
             "Bezier controllers must be positive"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise InvalidParamsError("; ".join(bad))
        return self


@dataclass(frozen=True)
class DamageState:
    """History variables of one material point."""

    r_t: float  # tensile threshold, >= ft
    r_c: float  # compressive threshold, >= f0c
    d_t: float = 0.0
    d_c: float = 0.0

    @classmethod
    def virgin(cls, params):
        return cls(r_t=params.ft, r_c=params.f0c)

    def as_array(self):
        return np.array([self.r_t, self.r_c, self.d_t, self.d_c])


def virgin_state_batch(params, n):
    """State array of shape (n, 4) with columns (r_t, r_c, d_t, d_c)."""
    state = np.zeros((n, 4))
    state[:, 0] = params.ft
    state[:, 1] = params.f0c
    return state


# ---------------------------------------------------------------------------
# Elasticity and yield surface scalars
# ---------------------------------------------------------------------------

def plane_stress_elasticity(E, nu):
    """Isotropic plane-stress matrix in engineering-shear Voigt form."""
    if E <= 0.0 or not 0.0 <= nu < 0.5:
        raise InvalidElasticError(f"invalid elastic constants E={E}, nu={nu}")
    f = E / (1.0 - nu * nu)
    return np.array([[f, f * nu, 0.0],
                     [f * nu, f, 0.0],
                     [0.0, 0.0, f * (1.0 - nu) / 2.0]])


def alpha_beta(params):
    """Yield-surface constants from the biaxial ratio and the two peaks."""
    alpha = (params.kb - 1.0) / (2.0 * params.kb - 1.0)
    beta = (1.0 - alpha) * params.fpc / params.ft - (1.0 + alpha)
    return alpha, beta


def tau_plus(s_eff, params):
    """Tensile scalar equivalent stress of an effective stress state.

    Evaluated on the full effective stress; the Heaviside gate on the
    largest principal stress switches the criterion off for
    all-compressive states.  Batched.
    """
    alpha, beta = alpha_beta(params)
    i1, j2 = invariants(s_eff)
    smax, _ = principal_values(s_eff)
    tau = (alpha * i1 + np.sqrt(3.0 * j2) + beta * smax) / (1.0 - alpha) \
        * (params.ft / params.fpc)
    return heaviside(smax) * tau


def tau_minus(s_eff, params):
    """Compressive scalar equivalent stress, gated on the smallest
    principal stress.  Batched."""
    alpha, beta = alpha_beta(params)
    i1, j2 = invariants(s_eff)
    smax, smin = principal_values(s_eff)
    tau = (alpha * i1 + np.sqrt(3.0 * j2)
           + params.kappa * beta * macaulay(smax)) / (1.0 - alpha)
    return heaviside(-smin) * tau


def update_threshold(tau, r_prev):
    """Irreversible threshold update max(r_prev, tau)."""
    return np.maximum(r_prev, tau)


# ---------------------------------------------------------------------------
# Quadratic Bezier segments and the compression curve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BezierCurve:
    """One quadratic Bezier segment through (x1,y1)-(x2,y2)-(x3,y3)."""

    x1: float
    x2: float
    x3: float
    y1: float
    y2: float
    y3: float


def _bezier_y(X, x1, x2, x3, y1, y2, y3):
    """Ordinate of the quadratic Bezier at abscissa X (arrays ok).

    Inverts x(p) for the parameter and evaluates y(p).  Degenerate
    abscissae fall back to the linear parametrization (A = 0) or to y1
    (all control abscissae coincident).
    """
    X = np.asarray(X, dtype=float)
    A = x1 - 2.0 * x2 + x3
    B = 2.0 * (x2 - x1)
    C = x1 - X
    scale = abs(x1) + abs(x2) + abs(x3)
    if abs(A) > 1e-14 * max(scale, 1e-300):
        D = np.maximum(B * B - 4.0 * A * C, 0.0)
        p = (-B + np.sqrt(D)) / (2.0 * A)
    elif abs(B) > 1e-14 * max(scale, 1e-300):
        p = -C / B
    else:
        p = np.zeros_like(X)
    p = np.clip(p, 0.0, 1.0)
    return (y1 - 2.0 * y2 + y3) * p * p + 2.0 * p * (y2 - y1) + y1


def bezier_eval(curve, X):
    """Ordinate of ``curve`` at X; X must lie within [x1, x3]."""
    span = curve.x3 - curve.x1
    tol = 1e-12 * max(abs(curve.x1), abs(curve.x3), 1e-300)
    if X < curve.x1 - tol or X > curve.x3 + tol:
        raise OutOfSegmentError(
            f"abscissa {X} outside segment [{curve.x1}, {curve.x3}]")
    del span
    return float(_bezier_y(X, curve.x1, curve.x2, curve.x3,
                           curve.y1, curve.y2, curve.y3))


def _bezier_area(x1, x2, x3, y1, y2, y3):
    """Exact integral of y dx over one quadratic segment."""
    ax = x1 - 2.0 * x2 + x3
    bx = 2.0 * (x2 - x1)
    ay = y1 - 2.0 * y2 + y3
    by = 2.0 * (y2 - y1)
    # integrate (ay p^2 + by p + y1)(2 ax p + bx) dp over [0, 1]
    return (2.0 * ax * ay / 4.0
            + (2.0 * ax * by + bx * ay) / 3.0
            + (2.0 * ax * y1 + bx * by) / 2.0
            + bx * y1)


@dataclass(frozen=True)
class CompressionLaw:
    """Regularized uniaxial compression curve for one element size.

    Control strains/stresses follow the hardening segment
    (e0,f0)-(ei,fi)-(ep,fp), two softening segments down to (eu,fu) and a
    residual plateau at fu.  The post-peak strains are stretched so the
    area under the two softening segments equals ``Gc / l_ch`` exactly.
    """

    e0: float
    ei: float
    ep: float
    ej: float
    ek: float
    er: float
    eu: float
    f0: float
    fi: float
    fp: float
    fj: float
    fk: float
    fr: float
    fu: float
    l_ch: float

    def strains(self):
        return np.array([self.e0, self.ei, self.ep, self.ej,
                         self.ek, self.er, self.eu])

    def stresses(self):
        return np.array([self.f0, self.fi, self.fp, self.fj,
                         self.fk, self.fr, self.fu])

    def softening_area(self):
        """Area under the two post-peak segments (the regularized energy)."""
        a2 = _bezier_area(self.ep, self.ej, self.ek, self.fp, self.fj, self.fk)
        a3 = _bezier_area(self.ek, self.er, self.eu, self.fk, self.fr, self.fu)
        return a2 + a3

    def psi(self, xi):
        """Uniaxial curve value at compressive strain measure xi (arrays ok)."""
        xi = np.asarray(xi, dtype=float)
        hard = _bezier_y(np.clip(xi, self.e0, self.ep), self.e0, self.ei,
                         self.ep, self.f0, self.fi, self.fp)
        soft2 = _bezier_y(np.clip(xi, self.ep, self.ek), self.ep, self.ej,
                          self.ek, self.fp, self.fj, self.fk)
        soft3 = _bezier_y(np.clip(xi, self.ek, self.eu), self.ek, self.er,
                          self.eu, self.fk, self.fr, self.fu)
        elastic = (self.f0 / self.e0) * xi if self.e0 > 0 else xi * 0.0
        out = np.where(xi <= self.e0, elastic,
                       np.where(xi <= self.ep, hard,
                                np.where(xi <= self.ek, soft2,
                                         np.where(xi <= self.eu, soft3,
                                                  self.fu))))
        return float(out) if out.ndim == 0 else out


def build_compression_law(params, l_ch):
    """Construct the regularized compression curve for element size l_ch.

    Control points: the hardening control sits on the elastic line at
    stress fi = f0c + c1*(fpc - f0c); the softening knee is
    fk = frc + c2*(fpc - frc) with the mid control at the mean stress; the
    unstretched post-peak strains span c3 peak strains.  Post-peak strains
    are then scaled about the peak so the softening area equals Gc/l_ch.
    """
    params.validate()
    if l_ch <= 0.0:
        raise SnapBackError(f"characteristic length must be positive, got {l_ch}")

    E = params.E
    f0, fp, fr = params.f0c, params.fpc, params.frc
    ep = params.epc

    e0 = f0 / E
    fi = f0 + params.c1 * (fp - f0)
    ei = min(fi / E, ep)

    fk = fr + params.c2 * (fp - fr)
    fj = 0.5 * (fp + fk)
    fu = fr
    spread = params.c3 * ep
    ej0 = ep + 0.45 * spread
    ek0 = ep + 1.00 * spread
    er0 = ep + 1.70 * spread
    eu0 = ep + 2.50 * spread

    g_target = params.Gc / l_ch
    g_soft = _bezier_area(ep, ej0, ek0, fp, fj, fk) \
        + _bezier_area(ek0, er0, eu0, fk, fr, fu)
    if not np.isfinite(g_soft) or g_soft <= 0.0:
        raise SnapBackError("unstretched softening branch has no positive area")
    stretch = g_target / g_soft
    if not np.isfinite(stretch) or stretch <= 0.0:
        raise SnapBackError(
            f"compression regularization needs stretch {stretch:g} <= 0 "
            f"at l_ch={l_ch:g}")

    return CompressionLaw(
        e0=e0, ei=ei, ep=ep,
        ej=ep + stretch * (ej0 - ep),
        ek=ep + stretch * (ek0 - ep),
        er=ep + stretch * (er0 - ep),
        eu=ep + stretch * (eu0 - ep),
        f0=f0, fi=fi, fp=fp, fj=fj, fk=fk, fr=fr, fu=fu,
        l_ch=l_ch)


# ---------------------------------------------------------------------------
# Damage variables
# ---------------------------------------------------------------------------

def tension_softening_exponent(params, l_dis):
    """Exponent of the exponential tension softening at element size l_dis.

    Raises SnapBackError when the element is too large to dissipate Gt
    without a snap-back (non-positive exponent).
    """
    denom = params.Gt * params.E / (l_dis * params.ft ** 2) - 0.5
    if denom <= 0.0:
        raise SnapBackError(
            f"tensile snap-back at l={l_dis:g}: need l < "
            f"{2.0 * params.Gt * params.E / params.ft ** 2:g}")
    return 1.0 / denom


def d_plus(r_t, params, l_dis, softening_A=None):
    """Tensile damage at threshold r_t (arrays ok)."""
    A = tension_softening_exponent(params, l_dis) \
        if softening_A is None else softening_A
    r_t = np.asarray(r_t, dtype=float)
    r0 = params.ft
    with np.errstate(over="ignore"):
        d = 1.0 - (r0 / np.maximum(r_t, r0)) \
            * np.exp(A * (1.0 - np.maximum(r_t, r0) / r0))
    d = np.clip(d, 0.0, _D_MAX)
    return float(d) if d.ndim == 0 else d


def d_minus(r_c, law, E):
    """Compressive damage at threshold r_c from the regularized curve."""
    r_c = np.asarray(r_c, dtype=float)
    r = np.maximum(r_c, law.f0)
    d = 1.0 - law.psi(r / E) / r
    d = np.where(r_c <= law.f0, 0.0, np.clip(d, 0.0, _D_MAX))
    return float(d) if d.ndim == 0 else d


# ---------------------------------------------------------------------------
# Stress integration
# ---------------------------------------------------------------------------

class DamageLaw:
    """Damage law prepared for one material and one dissipation length.

    Precomputes the elasticity matrix, the yield constants, the tension
    softening exponent and the regularized compression curve; exposes the
    batch integration used by the FEM solver and the calibration replay.
    """

    def __init__(self, params, l_dis):
        self.params = params.validate()
        self.l_dis = float(l_dis)
        self.elasticity = plane_stress_elasticity(params.E, params.nu)
        self.softening_A = tension_softening_exponent(params, l_dis)
        self.compression = build_compression_law(params, l_dis)

    def virgin_state(self, n=None):
        if n is None:
            return DamageState.virgin(self.params)
        return virgin_state_batch(self.params, n)

    def integrate(self, eps, state):
        """Integrate strains (n, 3) with states (n, 4).

        Returns (stress (n, 3), new state (n, 4)).  Thresholds and damage
        variables never decrease.
        """
        eps = np.asarray(eps, dtype=float)
        s_eff = eps @ self.elasticity.T
        s_pos, s_neg = spectral_split(s_eff)
        r_t = update_threshold(tau_plus(s_eff, self.params), state[:, 0])
        r_c = update_threshold(tau_minus(s_eff, self.params), state[:, 1])
        d_t = np.maximum(state[:, 2],
                         d_plus(r_t, self.params, self.l_dis,
                                softening_A=self.softening_A))
        d_c = np.maximum(state[:, 3],
                         d_minus(r_c, self.compression, self.params.E))
        sigma = (1.0 - d_t)[:, None] * s_pos + (1.0 - d_c)[:, None] * s_neg
        return sigma, np.stack([r_t, r_c, d_t, d_c], axis=1)

    def secant(self, eps, state):
        """Exact secant operator at the trial state of eps.

        With P+ the positive spectral projector of the trial effective
        stress, sigma = [(1-d_t) P+ + (1-d_c)(I - P+)] C eps holds exactly,
        which makes the assembled secant system a convergent Picard
        iteration for equilibrium.
        """
        eps = np.asarray(eps, dtype=float)
        s_eff = eps @ self.elasticity.T
        _, new = self.integrate(eps, state)
        d_t, d_c = new[:, 2], new[:, 3]

        smax, smin = principal_values(s_eff)
        theta = 0.5 * np.arctan2(2.0 * s_eff[:, 2],
                                 s_eff[:, 0] - s_eff[:, 1])
        c, s = np.cos(theta), np.sin(theta)
        # stress projection rows q_i and columns p_i in Voigt form
        p1 = np.stack([c * c, s * s, c * s], axis=1)
        q1 = np.stack([c * c, s * s, 2.0 * c * s], axis=1)
        p2 = np.stack([s * s, c * c, -c * s], axis=1)
        q2 = np.stack([s * s, c * c, -2.0 * c * s], axis=1)
        proj = heaviside(smax)[:, None, None] * p1[:, :, None] * q1[:, None, :] \
            + heaviside(smin)[:, None, None] * p2[:, :, None] * q2[:, None, :]
        eye = np.eye(3)
        op = (1.0 - d_t)[:, None, None] * proj \
            + (1.0 - d_c)[:, None, None] * (eye - proj)
        return op @ self.elasticity

    def tangent(self, eps, state, h=None):
        """Forward finite-difference tangent (n, 3, 3) at frozen states."""
        eps = np.asarray(eps, dtype=float)
        n = eps.shape[0]
        if h is None:
            h = 1e-8 * np.maximum(np.linalg.norm(eps, axis=-1), 1e-2)
            h = np.maximum(h, 1e-10)
        h = np.broadcast_to(np.asarray(h, dtype=float), (n,)).copy()
        # evaluate base and the three perturbed columns in one batch
        stack = np.tile(eps, (4, 1))
        for j in range(3):
            stack[(j + 1) * n:(j + 2) * n, j] += h
        sig, _ = self.integrate(stack, np.tile(state, (4, 1)))
        base = sig[:n]
        D = np.empty((n, 3, 3))
        for j in range(3):
            D[:, :, j] = (sig[(j + 1) * n:(j + 2) * n] - base) / h[:, None]
        return D


def integrate_stress(eps, state, params, l_dis):
    """Single-point stress integration.

    Returns the nominal stress vector and the updated (never decreasing)
    state for one strain in engineering Voigt form.
    """
    law = DamageLaw(params, l_dis)
    sigma, new = law.integrate(np.asarray(eps, dtype=float)[None, :],
                               state.as_array()[None, :])
    return sigma[0], replace(state, r_t=float(new[0, 0]), r_c=float(new[0, 1]),
                             d_t=float(new[0, 2]), d_c=float(new[0, 3]))


def tangent_fd(eps, state, params, l_dis, h=None):
    """Single-point forward finite-difference tangent at frozen state."""
    law = DamageLaw(params, l_dis)
    harr = None if h is None else np.array([h])
    return law.tangent(np.asarray(eps, dtype=float)[None, :],
                       state.as_array()[None, :], h=harr)[0]
