"""Error-bound conditions and linear convergence of gradient-type methods.

Modules
-------
core
    Objective models, critical sets and residual measure operators.
problems
    Builders for the shipped test problems and a JSON loader.
eb
    Condition checks, constant estimation and the implication chain.
solvers
    Gradient descent, abstract gradient, PPA, FBS, PALM and accelerated FBS.
analysis
    Measured and predicted rates, step-size windows, necessity checks.
dual
    Dual objectives of strongly convex primals.
cli
    The ``ebconv`` command.
"""

__version__ = "0.1.0"
