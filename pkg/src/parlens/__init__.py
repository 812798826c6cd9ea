"""Validation toolkit for binary protocol parsers."""
