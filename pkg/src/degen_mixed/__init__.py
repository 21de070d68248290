"""Degenerate mixed parabolic problems: certification, time integration and
finite-element instances (transient Stokes, 2D eddy-current analog)."""

__version__ = "0.1.0"
