"""Transfer-matrix cocycles for Schroedinger operators over the doubling map."""

__version__ = "0.1.0"
