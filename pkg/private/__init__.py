"""
Private numerical helpers for the solver package.
"""

__version__ = "0.1.0"
