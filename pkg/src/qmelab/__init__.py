"""qmelab: thermodynamic-consistency laboratory for tilted quantum master equations."""

__version__ = "0.1.0"
