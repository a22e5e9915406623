"""Zero-bias transformation and Stein-method bounds toolkit."""

__version__ = "0.1.0"
