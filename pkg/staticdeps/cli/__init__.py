"""
Command-line interface for staticdeps.
"""
from .main import create_parser, main, run

__all__ = ['create_parser', 'main', 'run']
