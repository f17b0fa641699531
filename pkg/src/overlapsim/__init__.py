"""Multi-talker speech simulation driven by learned overlap patterns."""

__version__ = "0.1.0"
