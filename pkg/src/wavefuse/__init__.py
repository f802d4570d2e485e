"""Camera/LiDAR fusion building blocks and a corruption robustness benchmark."""

__version__ = "0.1.0"
