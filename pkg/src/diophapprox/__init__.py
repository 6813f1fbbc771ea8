"""Desk-scale exact toolkit for metric Diophantine approximation.

Subpackages cover exact number-theoretic primitives (`numtheory`), rational
interval unions with exact Lebesgue measure (`intervals`), continued fractions
with certified convergent errors (`contfrac`), approximation-set construction
and correlation experiments (`approx_sets`), and square-free GCD graphs with
the quality-increment compression pipeline (`gcd_graph`).  The `cli` module
exposes everything as reproducible experiment commands.
"""

__version__ = "0.1.0"
