"""Closed-form neural tangent / NNGP kernels, kernel ridge regression,
finite-width ReLU networks, and a seeded simulation harness for comparing
their predictive behavior on data drawn from a known kernel."""

__version__ = "0.1.0"
