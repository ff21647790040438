"""Pseudospectral solver and verification harness for alpha-regularized MHD models."""

__version__ = "0.1.0"
