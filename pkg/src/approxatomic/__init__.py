"""Approximative K-atomic decompositions at finite dimension."""
