"""Matrix Certifier Agent

Searches for and verifies positivity certificates of real symmetric matrix
polynomials: quadratic-module membership, nowhere-negative-semidefiniteness,
univariate hermitian-square factorizations, symmetric diagonalization,
archimedean witnesses and separating states with point extraction.
"""

__version__ = "1.0.0"
__author__ = "Agents Team"
