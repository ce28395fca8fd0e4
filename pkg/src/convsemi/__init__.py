
"""Convolution calculus, local k-convoluted semigroups and their test-function homomorphism."""
