"""Report rendering and writing."""
