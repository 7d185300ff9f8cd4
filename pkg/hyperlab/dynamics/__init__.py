"""Numerical engine: torus maps, cocycles, foliations, conjugacies, entropy."""
