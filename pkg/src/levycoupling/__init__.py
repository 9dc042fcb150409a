"""Lévy-area increments coupled to Gaussian quadratic surrogates."""
