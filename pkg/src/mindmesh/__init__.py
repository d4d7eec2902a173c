"""EEG-driven facial geometry and Gaussian-splat avatar rendering."""

__version__ = "0.1.0"
