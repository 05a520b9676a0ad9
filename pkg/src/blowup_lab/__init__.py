"""Numerical laboratory for finite-time blow-up of u_t = Laplacian(u) + f(u).

Modules:

* ``nonlinearity``: f(u) = u^p L(u) families, hypothesis checks, Karamata bounds.
* ``resolvent``: G(X) = int_X^inf ds/f(s), its inverse, H, the ODE solution.
* ``pde_solver``: adaptive radial solver, blow-up time estimate, J monitor.
* ``similarity``: self-similar variables, Hermite projections, residuals.
* ``profiles``: predicted blow-up profiles and their comparison with runs.
* ``cli``: the ``blowup-lab`` command.
"""
__version__ = "0.1.0"

from . import nonlinearity, resolvent, pde_solver, similarity, profiles  # noqa: E402

__all__ = ["__version__", "nonlinearity", "resolvent", "pde_solver", "similarity", "profiles"]
