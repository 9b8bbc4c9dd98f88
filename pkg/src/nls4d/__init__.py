"""Pseudospectral toolbox for the defocusing quintic Schrodinger flow on
periodic boxes in up to four space dimensions, with the space-time norms,
frequency-localization operators, scale-function smoothing, and interaction
Morawetz diagnostics used to study it."""

__version__ = "0.1.0"
