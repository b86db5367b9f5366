"""Two-phase blended-ensemble intrusion detection for IIoT flow records."""

__version__ = "0.1.0"
