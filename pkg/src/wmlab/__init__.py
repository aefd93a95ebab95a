"""Desk-scale laboratory for initial-noise diffusion watermarks and perturbation attacks."""

__version__ = "0.1.0"
