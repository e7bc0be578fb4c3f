"""Feature-oriented repository summarization toolchain."""

__version__ = "0.1.0"
