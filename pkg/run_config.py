"""
GilbertLab Run Configuration
Environment defaults, key=value config files and the resolved RunConfig echoed into every manifest
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values, load_dotenv

load_dotenv()

DEFAULT_OUTPUT_DIR = os.getenv('GILBERTLAB_OUTPUT_DIR', './gilbertlab_output')
VERBOSE = os.getenv('GILBERTLAB_VERBOSE', '').strip().lower() in ('1', 'true', 'yes', 'on')

MODELS = ('tropical-lines', 'rectangular', 'custom', 'germ-grain')


class ConfigError(ValueError):
    """Raised for unknown keys, unparsable values or missing required settings"""


def default_threads() -> int:
    raw = os.getenv('GILBERTLAB_THREADS', '1')
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GILBERTLAB_THREADS must be an integer, got {raw!r}")


@dataclass
class RunConfig:
    """Fully resolved parameters of one CLI run"""
    command: str = ''
    model: str = 'tropical-lines'
    spec_file: Optional[str] = None
    lam: Optional[float] = None
    k: int = 1
    k_list: List[int] = field(default_factory=lambda: [5, 20, 50])
    window: float = 10.0
    margin: Optional[float] = None
    replicates: int = 1
    seed: int = 0
    threads: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR
    mu_rect: Optional[float] = None
    mu_diag: Optional[float] = None
    nodes: int = 128
    degree_max: int = 3
    spread: float = 1.0
    poly_file: Optional[str] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"Unsupported model: {self.model} (expected one of {', '.join(MODELS)})")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be at least 1, got {self.replicates}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.window <= 0:
            raise ConfigError(f"window side must be positive, got {self.window}")
        if self.lam is not None and self.lam <= 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {'lambda': 'lam', 'ks': 'k_list', 'output': 'output_dir', 'output-dir': 'output_dir'}


def _coerce(name: str, raw: str) -> Any:
    kind = str(_FIELD_TYPES[name])
    try:
        if name == 'k_list':
            return [int(v) for v in raw.replace(';', ',').split(',') if v.strip()]
        if 'int' in kind:
            return int(raw)
        if 'float' in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"Invalid value for {name}: {raw!r}")
    return raw


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a plain key=value file; unknown keys are errors"""
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    values: Dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        name = _ALIASES.get(key.strip().lower(), key.strip().lower().replace('-', '_'))
        if name not in _FIELD_TYPES or name == 'command':
            raise ConfigError(f"Unknown config key: {key}")
        if raw is None:
            raise ConfigError(f"Config key {key} has no value")
        values[name] = _coerce(name, raw.strip())
    return values


def resolve_config(command: str, flags: Dict[str, Any], config_file: Optional[str] = None) -> RunConfig:
    """Precedence: flags > config file > environment defaults > built-in defaults"""
    merged: Dict[str, Any] = {'threads': default_threads(), 'output_dir': DEFAULT_OUTPUT_DIR}
    if config_file:
        merged.update(read_config_file(config_file))
    merged.update({k: v for k, v in flags.items() if v is not None and k in _FIELD_TYPES})
    merged['command'] = command
    return RunConfig(**merged)


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(65536), b''):
            digest.update(block)
    return digest.hexdigest()


class RunManifest:
    """Collects artifacts of a run and writes manifest.json next to them"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.artifacts: List[Dict[str, str]] = []
        os.makedirs(config.output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.config.output_dir, name)

    def register(self, name: str) -> str:
        full = self.path(name)
        self.artifacts.append({'path': name, 'sha256': sha256_of(full)})
        print(f"   📄 {name}")
        return full

    def write_text(self, name: str, text: str) -> str:
        with open(self.path(name), 'w') as f:
            f.write(text)
        return self.register(name)

    def write(self) -> str:
        manifest = {
            'config': self.config.to_dict(),
            'artifacts': sorted(self.artifacts, key=lambda a: a['path']),
        }
        target = self.path('manifest.json')
        with open(target, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        return target
