"""Partitioned intrusion-response planning over boolean-state MDPs."""

__version__ = "0.1.0"
