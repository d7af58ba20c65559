"""leakforge: volume-leakage query recovery with synthetic auxiliary documents."""

__version__ = "0.1.0"
