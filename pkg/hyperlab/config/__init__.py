"""Configuration package for hyperlab."""
