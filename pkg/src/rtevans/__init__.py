"""Linear growth rate of the ablative Rayleigh-Taylor instability via the Evans function."""

__version__ = "0.1.0"
