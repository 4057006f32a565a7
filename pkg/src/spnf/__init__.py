"""Normal-form engine and spectral simulator for the Schrodinger-Poisson equation on the circle."""

__version__ = "0.1.0"
