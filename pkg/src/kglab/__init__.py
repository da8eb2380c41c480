"""Numerical laboratory for Klein-Gordon dispersive and Strichartz estimates
on radial scattering manifolds."""

__version__ = "0.1.0"
