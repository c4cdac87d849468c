"""
Configuration management for staticdeps.
Handles environment variables, .env files and JSON config files.
"""
import os
import json
import logging
from typing import Optional, Dict, Any, List
from pathlib import Path
from dataclasses import dataclass, asdict, field

from ..core.depcore import DEFAULT_SEEDS, UARCH_ROB_SIZES, DepConfig
from ..core.errors import ConfigError
from ..core.oracle import DEFAULT_MEM_FILL, OracleConfig, RegInit
from ..models.kernel import DEFAULT_BASE_ADDRESS

try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ("json", "text", "csv")


def parse_hex(text: Any, what: str = "value") -> int:
    """Parse a hexadecimal value, with or without the 0x prefix."""
    if isinstance(text, int):
        return text
    try:
        return int(str(text).strip(), 16)
    except ValueError:
        raise ConfigError(f"invalid hexadecimal {what}: '{text}'") from None


def parse_seeds(text: Any) -> List[int]:
    """Parse a comma-separated seed list such as ``1,2,3``."""
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [item for item in str(text).split(",") if item.strip()]
    try:
        seeds = [int(item, 0) if isinstance(item, str) else int(item) for item in items]
    except ValueError:
        raise ConfigError(f"invalid seed list: '{text}'") from None
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def parse_lifetime(text: Any) -> Optional[int]:
    """Parse a lifetime; ``inf``, ``none`` or an empty value mean unbounded."""
    if text is None or isinstance(text, int):
        return text
    value = str(text).strip().lower()
    if value in ("", "inf", "none"):
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"invalid lifetime: '{text}'") from None


def _env_int(name: str) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got '{raw}'") from None


@dataclass
class AnalysisConfig:
    """Static analysis settings. An explicit rob_size wins over the uarch preset."""
    uarch: str = "skylake"
    rob_size: Optional[int] = None
    spurious_threshold: float = 0.80
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    base_address: int = DEFAULT_BASE_ADDRESS


@dataclass
class OracleSettings:
    """Concrete-execution oracle settings."""
    iterations: int = 64
    reg_init: str = "distinct:42"
    mem_fill: int = DEFAULT_MEM_FILL
    lifetime: Optional[int] = None


@dataclass
class LoggingConfig:
    """Logging configuration."""
    level: str = "WARNING"
    log_dir: Optional[str] = None
    structured: bool = False
    console_output: bool = True
    file_rotation_mb: int = 10
    backup_count: int = 5


@dataclass
class OutputConfig:
    """Default output format per command."""
    deps: str = "json"
    oracle: str = "json"
    cov: str = "text"
    lift: str = "csv"
    stats: str = "csv"


class Config:
    """Main configuration class for staticdeps."""

    def __init__(self, config_file: Optional[str] = None, debug: bool = False):
        self.debug = debug
        if DOTENV_AVAILABLE:
            load_dotenv()
        self.environment = os.getenv('ENVIRONMENT', 'development')

        # Initialize configuration sections
        self.analysis = AnalysisConfig()
        self.oracle = OracleSettings()
        self.logging = LoggingConfig()
        self.output = OutputConfig()

        # Load configuration from various sources
        self._load_from_environment()

        if config_file:
            self._load_from_file(config_file)
        else:
            self._load_from_default_files()

        # Apply debug overrides
        if debug:
            self._apply_debug_settings()

        # Validate configuration
        self._validate_config()

    def _load_from_environment(self):
        """Load configuration from environment variables."""
        # Analysis configuration
        if os.getenv('STATICDEPS_SEEDS'):
            self.analysis.seeds = parse_seeds(os.getenv('STATICDEPS_SEEDS'))
        self.analysis.uarch = os.getenv('STATICDEPS_UARCH', self.analysis.uarch)
        rob_size = _env_int('STATICDEPS_ROB_SIZE')
        if rob_size is not None:
            self.analysis.rob_size = rob_size
        if os.getenv('STATICDEPS_SPURIOUS_THRESHOLD'):
            try:
                self.analysis.spurious_threshold = float(os.getenv('STATICDEPS_SPURIOUS_THRESHOLD'))
            except ValueError:
                raise ConfigError("STATICDEPS_SPURIOUS_THRESHOLD must be a number") from None
        if os.getenv('STATICDEPS_BASE_ADDRESS'):
            self.analysis.base_address = parse_hex(
                os.getenv('STATICDEPS_BASE_ADDRESS'), 'base address')

        # Oracle configuration
        iterations = _env_int('STATICDEPS_ITERATIONS')
        if iterations is not None:
            self.oracle.iterations = iterations
        self.oracle.reg_init = os.getenv('STATICDEPS_REG_INIT', self.oracle.reg_init)
        if os.getenv('STATICDEPS_MEM_FILL'):
            self.oracle.mem_fill = parse_hex(os.getenv('STATICDEPS_MEM_FILL'), 'memory fill')
        if os.getenv('STATICDEPS_LIFETIME'):
            self.oracle.lifetime = parse_lifetime(os.getenv('STATICDEPS_LIFETIME'))

        # Logging configuration
        self.logging.level = os.getenv('LOG_LEVEL', self.logging.level)
        self.logging.log_dir = os.getenv('LOG_DIR', self.logging.log_dir)
        self.logging.structured = os.getenv('LOG_STRUCTURED', 'false').lower() == 'true'

    def _load_from_file(self, config_file: str):
        """Load configuration from a JSON file."""
        config_path = Path(config_file)

        if not config_path.exists():
            raise ConfigError(f"Configuration file not found: {config_file}")

        try:
            with open(config_path, 'r') as f:
                config_data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid configuration file {config_file}: {e}") from e

        self._apply_config_data(config_data)

    def _load_from_default_files(self):
        """Load configuration from default configuration files."""
        # Look for configuration files in order of precedence
        config_files = [
            'staticdeps.local.json',  # Local overrides (not in version control)
            f'staticdeps.{self.environment}.json',  # Environment-specific
            'staticdeps.json'  # Default configuration
        ]

        for config_file in config_files:
            config_path = Path(config_file)
            if config_path.exists():
                try:
                    with open(config_path, 'r') as f:
                        config_data = json.load(f)
                    self._apply_config_data(config_data)
                    logger.debug("loaded configuration from %s", config_file)
                    break
                except (json.JSONDecodeError, IOError) as e:
                    logger.warning("Could not load config file %s: %s", config_file, e)

    def _apply_config_data(self, config_data: Dict[str, Any]):
        """Apply configuration data from dictionary."""
        if 'analysis' in config_data:
            self._update_dataclass(self.analysis, config_data['analysis'])
            self.analysis.seeds = parse_seeds(self.analysis.seeds)
            self.analysis.base_address = parse_hex(self.analysis.base_address, 'base address')

        if 'oracle' in config_data:
            self._update_dataclass(self.oracle, config_data['oracle'])
            self.oracle.mem_fill = parse_hex(self.oracle.mem_fill, 'memory fill')
            self.oracle.lifetime = parse_lifetime(self.oracle.lifetime)

        if 'logging' in config_data:
            self._update_dataclass(self.logging, config_data['logging'])

        if 'output' in config_data:
            self._update_dataclass(self.output, config_data['output'])

    def _update_dataclass(self, target_obj: object, data: Dict[str, Any]):
        """Update a dataclass instance with data from dictionary."""
        for key, value in data.items():
            if hasattr(target_obj, key):
                setattr(target_obj, key, value)
            else:
                logger.warning("Ignoring unknown configuration key '%s'", key)

    def _apply_debug_settings(self):
        """Apply debug-specific configuration overrides."""
        self.logging.level = "DEBUG"
        self.logging.console_output = True

    def _validate_config(self):
        """Validate configuration settings."""
        if self.analysis.uarch not in UARCH_ROB_SIZES:
            known = ", ".join(sorted(UARCH_ROB_SIZES))
            raise ConfigError(f"Unknown microarchitecture '{self.analysis.uarch}' (known: {known})")

        for name in ('deps', 'oracle', 'cov', 'lift', 'stats'):
            if getattr(self.output, name) not in OUTPUT_FORMATS:
                raise ConfigError(f"Output format for {name} must be one of {OUTPUT_FORMATS}")

        if not isinstance(logging.getLevelName(self.logging.level.upper()), int):
            raise ConfigError(f"Unknown log level '{self.logging.level}'")

        # DepConfig and OracleConfig enforce the numeric invariants
        self.dep_config()
        self.oracle_config()

    @property
    def rob_size(self) -> int:
        """Explicit ROB size, else the preset of the configured microarchitecture."""
        if self.analysis.rob_size is not None:
            return self.analysis.rob_size
        return UARCH_ROB_SIZES[self.analysis.uarch]

    def dep_config(self) -> DepConfig:
        return DepConfig(
            rob_size=self.rob_size,
            spurious_threshold=self.analysis.spurious_threshold,
            seeds=tuple(self.analysis.seeds),
            synthetic_base_address=self.analysis.base_address,
        )

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(
            iterations=self.oracle.iterations,
            reg_init=RegInit.parse(self.oracle.reg_init),
            mem_fill=self.oracle.mem_fill,
            lifetime=self.oracle.lifetime,
            synthetic_base_address=self.analysis.base_address,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return {
            'environment': self.environment,
            'debug': self.debug,
            'analysis': {
                **asdict(self.analysis),
                'base_address': hex(self.analysis.base_address),
            },
            'oracle': {
                **asdict(self.oracle),
                'mem_fill': hex(self.oracle.mem_fill),
            },
            'logging': asdict(self.logging),
            'output': asdict(self.output),
        }

    def save_to_file(self, config_file: str):
        """Save current configuration to file."""
        config_path = Path(config_file)
        config_path.parent.mkdir(parents=True, exist_ok=True)

        with open(config_path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, default=str)


def load_config(config_file: Optional[str] = None, debug: bool = False) -> Config:
    """Load configuration with optional file override."""
    return Config(config_file=config_file, debug=debug)
