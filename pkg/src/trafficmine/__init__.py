"""Workflow-net discovery, loop/delay diagnostics and log simulation for timed event logs."""

__version__ = "0.1.0"
