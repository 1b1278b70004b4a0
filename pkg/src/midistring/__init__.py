"""Generate, encode and learn from LLM-written four-track symbolic music."""

__version__ = "0.1.0"
