"""Mean-field binary choice: master equation, SSA, metastability and calibration."""

__version__ = "0.1.0"
