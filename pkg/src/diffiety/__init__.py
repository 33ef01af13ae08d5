"""Controllability analysis of underdetermined PDE systems."""
