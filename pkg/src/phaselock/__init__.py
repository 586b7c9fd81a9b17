"""Rotation numbers, phase-lock areas and forcing synthesis for torus flows."""
