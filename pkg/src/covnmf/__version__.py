"""Version information for covnmf."""

__version__ = "0.1.0"
