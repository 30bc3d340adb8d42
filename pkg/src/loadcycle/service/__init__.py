"""ECU-emulating service: telemetry streaming, label ingestion, training jobs."""

from .registry import ModelRegistry, RegistryEntry
from .server import EcuService, ServeConfig, Session, load_replay_source, seed_registry_with_base

__all__ = [
    "EcuService",
    "ModelRegistry",
    "RegistryEntry",
    "ServeConfig",
    "Session",
    "load_replay_source",
    "seed_registry_with_base",
]
