"""Constructions and numerical checks for A-free measures of first order
constant-coefficient operators.

Modules:

* ``operator``   operator tuples, symbols, wave cone, normalization
* ``witness``    certificates for the balancing condition and their verifier
* ``measures``   piecewise measures, test functions, weak pairing
* ``tree``       dyadic branched trees
* ``balance``    balancing measures for scalar operators
* ``sphere``     boundary correctors on the unit sphere
* ``lusin``      A-free approximation of continuous fields
* ``forms``      exterior derivative operators
* ``cli``        command-line entry point
"""

__version__ = "0.1.0"
