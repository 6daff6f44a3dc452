"""Rule-based detection of leadership behaviour in open-source issue comments."""

__version__ = "0.1.0"
