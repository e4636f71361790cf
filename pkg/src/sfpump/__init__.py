"""Classic and learned feasibility pumps for bounded mixed-integer programs."""

__version__ = "0.1.0"
