"""Numerical checks of the uniform Lopatinski condition for constant-coefficient
hyperbolic and partially parabolic boundary value problems on a half-space,
with exact solution of the Laplace-Fourier resolvent problem."""

__version__ = "0.1.0"
