"""Lattice, spectral, bracket and flow modules."""
