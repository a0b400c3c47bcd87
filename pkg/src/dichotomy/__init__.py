"""Parallel dichotomy solver for tridiagonal systems on logical ranks."""
