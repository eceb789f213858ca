"""Numerical helpers for replica_lab: quadrature, 1-D minimization, estimators."""
