"""Strong-pathwise Stratonovich SDE integrators on matrix Lie group
homogeneous manifolds: stochastic Taylor, stochastic Munthe-Kaas,
Castell-Gaines and uniformly accurate exponential Lie series steppers,
with an experiment harness for drift, convergence and accuracy studies.
"""

from . import algebra, harness, integrators, noise, problems

__all__ = ["algebra", "harness", "integrators", "noise", "problems"]

__version__ = "0.1.0"
