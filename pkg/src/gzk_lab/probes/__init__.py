"""Randomized stress tests of the scalar, multilinear and growth estimates."""
