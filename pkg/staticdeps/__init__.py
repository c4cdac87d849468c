"""
staticdeps - static extraction of memory-carried dependencies in basic blocks.
"""

__version__ = "1.0.0"
__author__ = "Performance Tools"
