"""
Utility modules for staticdeps.
"""
from .config import Config, load_config
from .logger import setup_logger, get_logger, log_duration
from .mock_data import MockDataGenerator

__all__ = [
    'Config',
    'load_config',
    'setup_logger',
    'get_logger',
    'log_duration',
    'MockDataGenerator'
]
