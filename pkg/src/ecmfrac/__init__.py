"""ecmfrac: phase-field electro-chemo-mechanical fracture simulator."""

__version__ = "0.1.0"
