"""SOP-driven multi-agent root cause analysis over a simulated microservice deployment."""

__version__ = "0.1.0"
