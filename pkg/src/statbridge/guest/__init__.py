"""The embedded guest language."""
