"""Command-line interface for transdim."""
