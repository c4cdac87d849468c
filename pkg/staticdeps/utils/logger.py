"""
Logging configuration for staticdeps.
Console logs go to stderr so stdout stays machine-readable.
"""
import os
import sys
import time
import logging
import logging.handlers
from contextlib import contextmanager
from typing import Iterator, Optional
from datetime import datetime
from pathlib import Path
import json

# Extra fields copied into structured records when present
EXTRA_FIELDS = (
    'kernel', 'seed', 'seeds', 'copies', 'deps', 'iterations',
    'operation', 'duration_ms', 'path', 'exit_code',
)


class StructuredFormatter(logging.Formatter):
    """Custom formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as structured JSON."""
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        # Add exception info if present
        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        # Add extra fields
        for name in EXTRA_FIELDS:
            if hasattr(record, name):
                log_entry[name] = getattr(record, name)

        return json.dumps(log_entry, default=str)


class ColoredConsoleFormatter(logging.Formatter):
    """Level-colored console lines with the run's context fields appended.

    ``[INFO] 12:00:01 staticdeps.cli: Performance: deps  copies=57 duration_ms=3.1``
    """

    LEVEL_COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    FIELD_COLOR = '\033[2m'
    RESET = '\033[0m'

    def __init__(self, use_color: bool = True):
        super().__init__()
        self.use_color = use_color

    def _paint(self, color: str, text: str) -> str:
        return f"{color}{text}{self.RESET}" if self.use_color else text

    def _fields(self, record: logging.LogRecord) -> str:
        parts = []
        for name in EXTRA_FIELDS:
            if not hasattr(record, name):
                continue
            value = getattr(record, name)
            if isinstance(value, float):
                value = f"{value:.1f}"
            elif isinstance(value, (list, tuple)):
                value = ",".join(map(str, value))
            parts.append(f"{name}={value}")
        return self._paint(self.FIELD_COLOR, " ".join(parts)) if parts else ""

    def format(self, record: logging.LogRecord) -> str:
        level = self._paint(self.LEVEL_COLORS.get(record.levelname, ''), f"[{record.levelname}]")
        timestamp = datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        formatted = f"{level} {timestamp} {record.name}: {record.getMessage()}"

        fields = self._fields(record)
        if fields:
            formatted += f"  {fields}"

        if record.levelno >= logging.ERROR:
            formatted += f" ({record.module}.{record.funcName}:{record.lineno})"

        if record.exc_info:
            formatted += f"\n{self.formatException(record.exc_info)}"

        return formatted


def setup_logger(name: str = "staticdeps", level: str = "WARNING",
                 log_dir: Optional[str] = None,
                 structured: bool = False,
                 console_output: bool = True,
                 rotation_mb: int = 10,
                 backup_count: int = 5) -> logging.Logger:
    """
    Set up a logger with appropriate handlers.

    Args:
        name: Logger name; module loggers under this name propagate to it
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Directory for rotating log files; no files when None
        structured: Whether to use structured JSON logging
        console_output: Whether to log to stderr

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Clear existing handlers to avoid duplicates
    logger.handlers.clear()
    logger.setLevel(getattr(logging, level.upper()))
    logger.propagate = False

    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)

        # File handler for all logs
        file_handler = logging.handlers.RotatingFileHandler(
            os.path.join(log_dir, f"{name}.log"),
            maxBytes=rotation_mb * 1024 * 1024,
            backupCount=backup_count
        )
        if structured:
            file_handler.setFormatter(StructuredFormatter())
        else:
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            ))
        logger.addHandler(file_handler)

        # Separate error log file
        error_handler = logging.handlers.RotatingFileHandler(
            os.path.join(log_dir, f"{name}_errors.log"),
            maxBytes=rotation_mb * 1024 * 1024,
            backupCount=backup_count
        )
        error_handler.setLevel(logging.ERROR)
        if structured:
            error_handler.setFormatter(StructuredFormatter())
        else:
            error_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s - %(pathname)s:%(lineno)d'
            ))
        logger.addHandler(error_handler)

    # Console handler
    if console_output:
        console_handler = logging.StreamHandler(sys.stderr)

        if structured:
            console_handler.setFormatter(StructuredFormatter())
        else:
            colored = (os.getenv('ENVIRONMENT', 'development') == 'development'
                       and sys.stderr.isatty())
            console_handler.setFormatter(ColoredConsoleFormatter(use_color=colored))

        logger.addHandler(console_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Get a logger with the specified name."""
    return logging.getLogger(name)


@contextmanager
def log_duration(logger: logging.Logger, operation: str, **fields) -> Iterator[None]:
    """Log how long the enclosed block took, at DEBUG level."""
    start = time.perf_counter()
    try:
        yield
    finally:
        duration_ms = (time.perf_counter() - start) * 1000
        logger.debug(
            f"Performance: {operation} took {duration_ms:.1f} ms",
            extra={'operation': operation, 'duration_ms': round(duration_ms, 3), **fields},
        )
