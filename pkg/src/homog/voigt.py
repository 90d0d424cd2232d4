"""2D plane-stress Voigt algebra.

Conventions used everywhere in this package:

    strain = [e_xx, e_yy, gamma_xy]   (engineering shear, gamma = 2*e_xy)
    stress = [s_xx, s_yy, s_xy]       (tensor shear component)

Stress/strain vectors are plain numpy arrays of shape (3,) or batches of
shape (..., 3).  All functions here are pure and broadcast over leading
batch dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotSPDError


def heaviside(x):
    """1 where x > 0, else 0 (zero belongs to the inactive branch)."""
    x = np.asarray(x, dtype=float)
    out = (x > 0.0).astype(float)
    return float(out) if out.ndim == 0 else out


def macaulay(x):
    """Positive part max(x, 0)."""
    x = np.asarray(x, dtype=float)
    out = np.maximum(x, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PrincipalPair:
    """Eigenvalues (max first) and orthonormal eigenvectors of a 2x2
    symmetric stress tensor given in Voigt form."""

    values: tuple
    directions: np.ndarray  # rows are the two unit eigenvectors


def principal_values(s):
    """Principal stresses (s_max, s_min) of Voigt stresses, batched."""
    s = np.asarray(s, dtype=float)
    c = 0.5 * (s[..., 0] + s[..., 1])
    r = np.hypot(0.5 * (s[..., 0] - s[..., 1]), s[..., 2])
    return c + r, c - r


def principal_decomposition(s):
    """Eigen decomposition of a single Voigt stress vector.

    Equal eigenvalues (hydrostatic states) return the canonical axes so the
    output is deterministic.
    """
    s = np.asarray(s, dtype=float)
    smax, smin = principal_values(s)
    # atan2(0, 0) = 0 gives the canonical axes for tied eigenvalues
    theta = 0.5 * np.arctan2(2.0 * s[2], s[0] - s[1])
    n1 = np.array([np.cos(theta), np.sin(theta)])
    n2 = np.array([-np.sin(theta), np.cos(theta)])
    return PrincipalPair(values=(float(smax), float(smin)),
                         directions=np.vstack([n1, n2]))


def spectral_split(s):
    """Split Voigt stresses into (positive, negative) parts.

    The positive part keeps only principal stresses with positive sign,
    projected back through the outer products of their eigenvectors; the
    negative part is the exact remainder, so both always sum to the input.
    Batched over leading dimensions.
    """
    s = np.asarray(s, dtype=float)
    smax, smin = principal_values(s)
    theta = 0.5 * np.arctan2(2.0 * s[..., 2], s[..., 0] - s[..., 1])
    c, sn = np.cos(theta), np.sin(theta)
    # n1 (x) n1 and n2 (x) n2 in Voigt stress form
    p1 = np.stack([c * c, sn * sn, c * sn], axis=-1)
    p2 = np.stack([sn * sn, c * c, -c * sn], axis=-1)
    pos = (heaviside(smax) * smax)[..., None] * p1 \
        + (heaviside(smin) * smin)[..., None] * p2
    return pos, s - pos


def invariants(s):
    """(I1, J2) of a plane-stress state, using the full 3D deviator with
    s_zz = 0.  Batched."""
    s = np.asarray(s, dtype=float)
    i1 = s[..., 0] + s[..., 1]
    m = i1 / 3.0
    j2 = 0.5 * ((s[..., 0] - m) ** 2 + (s[..., 1] - m) ** 2 + m ** 2) \
        + s[..., 2] ** 2
    return i1, j2


def spd_sqrt(m, rel_tol=1e-12):
    """Symmetric square root of an SPD matrix via eigendecomposition."""
    m = np.asarray(m, dtype=float)
    sym_err = np.linalg.norm(m - m.T)
    if sym_err > 1e-10 * max(np.linalg.norm(m), 1.0):
        raise NotSPDError(f"matrix is not symmetric (asymmetry {sym_err:g})")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if w[0] <= rel_tol * w[-1] or w[-1] <= 0.0:
        raise NotSPDError(f"matrix is not positive definite (eigenvalues {w})")
    return (v * np.sqrt(w)) @ v.T


def pseudoinverse(a, rcond=1e-10):
    """Moore-Penrose inverse with singular values below rcond*s_max dropped."""
    return np.linalg.pinv(np.asarray(a, dtype=float), rcond=rcond)
