"""RevHelper: label, analyze, and predict the usefulness of inline code-review comments."""

__version__ = "0.1.0"
