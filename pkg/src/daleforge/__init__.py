"""Desk-scale simulator and processing pipeline for UK-DALE style household energy data."""

__version__ = "0.1.0"
