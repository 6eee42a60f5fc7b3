"""Desk-scale variable-bitrate neural video codec laboratory."""

__author__ = "VBR Video Codec developers"
__version__ = "0.1.0"
