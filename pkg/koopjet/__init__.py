"""Koopman/SINDy identification and control toolkit for single-spool turbojets."""

__version__ = "0.1.0"
