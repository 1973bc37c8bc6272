"""VolOcc - volatility occupation time estimation toolkit."""

__version__ = "0.1.0"
