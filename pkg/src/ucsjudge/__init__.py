"""Cross-lingual LLM-judge transfer through a universal criteria set."""

__version__ = "0.1.0"
