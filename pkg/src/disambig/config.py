"""Service configuration: one TOML file, overridable by environment variables.

Every override key is the documented DISAMBIG_* name (see OVERRIDES); values
are parsed with the same rules as the file. Paths are validated before the
service binds its listener.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents.builtin import DEFAULT_ALEATORIC_LEXICON
from .errors import ConfigError
from .model import SurfaceMode
from .session import DEFAULT_SESSION_TTL_S

ENV_PREFIX = "DISAMBIG_"

BACKEND_KINDS = ("mock", "http")


@dataclass(frozen=True)
class ServiceConfig:
    store_path: Path
    host: str = "127.0.0.1"
    port: int = 8080
    backend_kind: str = "mock"
    backend_rules_path: Optional[Path] = None
    backend_url: Optional[str] = None
    backend_model: Optional[str] = None
    backend_api_key_env: str = "DISAMBIG_API_KEY"
    surface: SurfaceMode = SurfaceMode.ASK_FIRST
    history_window: int = 8
    agents_timeout_ms: int = 2000
    aleatoric_lexicon: tuple[str, ...] = DEFAULT_ALEATORIC_LEXICON
    entity_fuzzy: bool = False
    agents_disabled: tuple[str, ...] = ()
    session_ttl_seconds: float = DEFAULT_SESSION_TTL_S
    session_snapshot_dir: Optional[Path] = None
    cors_origins: tuple[str, ...] = ()
    debug_trace: bool = False

    def __post_init__(self) -> None:
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.backend_kind!r}")
        if self.backend_kind == "http" and not (self.backend_url and self.backend_model):
            raise ConfigError("http backend requires backend.url and backend.model")
        if self.history_window < 0:
            raise ConfigError("policy.history_window must be >= 0")
        if self.agents_timeout_ms <= 0:
            raise ConfigError("agents.timeout_ms must be positive")
        if self.session_ttl_seconds <= 0:
            raise ConfigError("session.ttl_seconds must be positive")

    def validate_paths(self) -> None:
        """Check every referenced path before the listener binds."""
        if not self.store_path.exists():
            raise ConfigError(f"store file does not exist: {self.store_path}")
        if self.backend_rules_path is not None and not self.backend_rules_path.exists():
            raise ConfigError(f"mock rules file does not exist: {self.backend_rules_path}")


def _as_bool(value: Any, key: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
        return value.lower() in ("true", "1", "yes")
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _as_int(value: Any, key: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _as_float(value: Any, key: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


# Documented environment overrides: env name -> (section, key).
OVERRIDES: dict[str, tuple[str, str]] = {
    f"{ENV_PREFIX}LISTEN_HOST": ("listen", "host"),
    f"{ENV_PREFIX}LISTEN_PORT": ("listen", "port"),
    f"{ENV_PREFIX}STORE_PATH": ("", "store_path"),
    f"{ENV_PREFIX}BACKEND_KIND": ("backend", "kind"),
    f"{ENV_PREFIX}BACKEND_RULES_PATH": ("backend", "rules_path"),
    f"{ENV_PREFIX}BACKEND_URL": ("backend", "url"),
    f"{ENV_PREFIX}BACKEND_MODEL": ("backend", "model"),
    f"{ENV_PREFIX}BACKEND_API_KEY_ENV": ("backend", "api_key_env"),
    f"{ENV_PREFIX}POLICY_SURFACE": ("policy", "surface"),
    f"{ENV_PREFIX}POLICY_HISTORY_WINDOW": ("policy", "history_window"),
    f"{ENV_PREFIX}AGENTS_TIMEOUT_MS": ("agents", "timeout_ms"),
    f"{ENV_PREFIX}AGENTS_ENTITY_FUZZY": ("agents", "entity_fuzzy"),
    f"{ENV_PREFIX}SESSION_TTL_SECONDS": ("session", "ttl_seconds"),
    f"{ENV_PREFIX}SESSION_SNAPSHOT_DIR": ("session", "snapshot_dir"),
    f"{ENV_PREFIX}CORS_ORIGINS": ("cors", "origins"),
    f"{ENV_PREFIX}DEBUG_TRACE": ("", "debug_trace"),
}


def _apply_env(data: dict[str, Any], env: Mapping[str, str]) -> dict[str, Any]:
    for env_key, (section, key) in OVERRIDES.items():
        if env_key not in env:
            continue
        value: Any = env[env_key]
        if key == "origins":
            value = [origin.strip() for origin in value.split(",") if origin.strip()]
        if section:
            data.setdefault(section, {})[key] = value
        else:
            data[key] = value
    return data


def load_config(path: str | Path, env: Optional[Mapping[str, str]] = None) -> ServiceConfig:
    """Parse the TOML config file and apply DISAMBIG_* environment overrides."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data: dict[str, Any] = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    data = _apply_env(data, os.environ if env is None else env)

    if "store_path" not in data:
        raise ConfigError(f"{path}: store_path is required")

    listen = data.get("listen", {})
    backend = data.get("backend", {})
    policy = data.get("policy", {})
    agents = data.get("agents", {})
    session = data.get("session", {})
    cors = data.get("cors", {})

    surface_raw = policy.get("surface", SurfaceMode.ASK_FIRST.value)
    try:
        surface = SurfaceMode(surface_raw)
    except ValueError:
        raise ConfigError(
            f"policy.surface must be one of {[m.value for m in SurfaceMode]}, got {surface_raw!r}"
        ) from None

    # Paths in the file are resolved relative to the file's directory.
    def resolve(p: Any) -> Path:
        candidate = Path(str(p))
        return candidate if candidate.is_absolute() else (path.parent / candidate)

    snapshot_dir = session.get("snapshot_dir")
    return ServiceConfig(
        store_path=resolve(data["store_path"]),
        host=str(listen.get("host", "127.0.0.1")),
        port=_as_int(listen.get("port", 8080), "listen.port"),
        backend_kind=str(backend.get("kind", "mock")),
        backend_rules_path=resolve(backend["rules_path"]) if backend.get("rules_path") else None,
        backend_url=backend.get("url"),
        backend_model=backend.get("model"),
        backend_api_key_env=str(backend.get("api_key_env", "DISAMBIG_API_KEY")),
        surface=surface,
        history_window=_as_int(policy.get("history_window", 8), "policy.history_window"),
        agents_timeout_ms=_as_int(agents.get("timeout_ms", 2000), "agents.timeout_ms"),
        aleatoric_lexicon=tuple(agents.get("aleatoric_lexicon", DEFAULT_ALEATORIC_LEXICON)),
        entity_fuzzy=_as_bool(agents.get("entity_fuzzy", False), "agents.entity_fuzzy"),
        agents_disabled=tuple(agents.get("disabled", ())),
        session_ttl_seconds=_as_float(session.get("ttl_seconds", DEFAULT_SESSION_TTL_S), "session.ttl_seconds"),
        session_snapshot_dir=resolve(snapshot_dir) if snapshot_dir else None,
        cors_origins=tuple(cors.get("origins", ())),
        debug_trace=_as_bool(data.get("debug_trace", False), "debug_trace"),
    )
