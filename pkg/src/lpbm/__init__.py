"""Numerical verification toolkit for L_p Brunn-Minkowski type inequalities.

Modules: geometry (bodies and exact operations), solver (LP, membership,
distances), psum (L_p addition), measures (volume/Gaussian/density engines),
functionals (Wills-type functionals), verify (inequality harness), cli
(experiment runner).  Hot kernels live in kernels and are numba-compiled
unless LPBM_NUMBA=0.
"""

__version__ = "0.1.0"

from . import geometry, kernels, measures, psum, rng, solver  # noqa: F401
