"""Pseudospectral solver and experiment harness for Oldroyd-B flows with stress diffusion."""
