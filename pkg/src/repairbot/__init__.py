"""repairbot: an autonomous repair pipeline for failing CI builds."""

__version__ = "0.1.0"
