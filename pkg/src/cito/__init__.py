"""Contact-implicit trajectory optimization for planar legged robots.

The toolkit discovers contact sequences by solving a nonconvex optimal
control problem with integral cross-complementarity constraints, using
sequential convex programming with an embedded delta-homotopy and a
self-contained sparse SOCP solver.  An independent time-stepping
simulator is included for physical validation.
"""

from jax import config as _jax_config

# All numerics in this package assume double precision.
_jax_config.update("jax_enable_x64", True)

__version__ = "0.1.0"
