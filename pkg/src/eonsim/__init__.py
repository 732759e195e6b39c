"""Discrete-event simulator for protected elastic optical networks."""
