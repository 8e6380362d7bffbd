"""Current-carrying stationary states on 1-d quantum lattices.

Operator algebra, exact finite-ring dynamics, free-fermion Wick evaluation,
Lieb-Robinson bounds and the charge-energy sum rules, with a batch CLI.
"""

__version__ = "0.1.0"
