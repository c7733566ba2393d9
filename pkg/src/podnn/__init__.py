"""Meshfree reduced-order modeling with a neural surrogate of the parametric map.

Subpackages and modules:

- ``geometry``: polar domains, scattered nodes, stencils
- ``rbf_fd``: RBF-FD stencil weights and the high-fidelity system
- ``pod``: snapshot matrices and SVD-truncated reduced bases
- ``rom``: the reduced least-squares online solver
- ``dnn``: from-scratch ReLU MLP + Adam surrogate training
- ``netcalc``: exact ReLU network calculus and constructive approximations
- ``pipeline``/``cli``: offline/online orchestration, benchmark and reports
"""

from ._backend import COMPILED

__version__ = "0.1.0"
__all__ = ["COMPILED", "__version__"]
