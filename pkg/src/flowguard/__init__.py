"""Flow-based intrusion classification, ensembles, attributions and rule replay."""

__version__ = "0.1.0"
