"""Virtual-laboratory homogenization of in-plane masonry.

A tension/compression damage constitutive law, a small plane-stress FEM
driving brick/mortar RVE experiments, data isotropization, internal-work
parameter identification, and the resulting calibrated macro-scale law.
"""

__version__ = "0.1.0"
