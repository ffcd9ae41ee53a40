# config.py
"""
Configuration documents: a JSON file holding the network spec and the run
options. Unknown keys are rejected. Environment defaults (.env supported)
cover the log level, the results database and the output directory.
"""
import json
import logging
import os
from fractions import Fraction
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from blueprints.compose import XOR_DATASET, NetworkSpec
from bnn.bitfloat import Fp32Bits
from engine.simulator import PolicyKind

load_dotenv()

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """The configuration document could not be read or does not describe a valid spec."""


def log_level() -> str:
    return os.environ.get("PETRIBNN_LOG_LEVEL", "INFO").upper()


def db_path() -> str:
    return os.environ.get("PETRIBNN_DB_PATH", "./data/results/runs.db")


def out_dir() -> str:
    return os.environ.get("PETRIBNN_OUT_DIR", "./out")


class DataRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bits: str
    label: int

    @field_validator("bits")
    @classmethod
    def _bits(cls, value: str) -> str:
        if not value or set(value) - {"0", "1"}:
            raise ValueError(f"feature row must be a bit string, got {value!r}")
        return value

    @field_validator("label")
    @classmethod
    def _label(cls, value: int) -> int:
        if value not in (-1, 1):
            raise ValueError("label must be -1 or +1")
        return value


class SpecConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    features: int = 2
    hidden: int = 2
    dataset: List[DataRow] = Field(default_factory=lambda: [
        DataRow(bits="".join(str(b) for b in row), label=label) for row, label in XOR_DATASET])
    learning_rates: List[str] = Field(default_factory=lambda: ["0.6"])
    epoch_budget: Optional[int] = 100
    seed: int = 7
    initial_weights: Optional[List[str]] = None

    def to_spec(self) -> NetworkSpec:
        weights = None
        if self.initial_weights is not None:
            weights = tuple(Fp32Bits.from_hex(w) for w in self.initial_weights)
        return NetworkSpec(
            features=self.features,
            hidden=self.hidden,
            dataset=tuple((tuple(int(b) for b in row.bits), row.label) for row in self.dataset),
            learning_rates=tuple(Fraction(r) for r in self.learning_rates),
            epoch_budget=self.epoch_budget,
            seed=self.seed,
            initial_weights=weights,
        )


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(1, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0])
    policy: PolicyKind = PolicyKind.UNIFORM
    instrument: bool = True
    budget: bool = True
    max_steps: Optional[int] = None
    state_budget: int = Field(10_000_000, ge=1)
    out: Optional[str] = None
    db: Optional[str] = None


class Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: SpecConfig = Field(default_factory=SpecConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    def network_spec(self) -> NetworkSpec:
        try:
            return self.spec.to_spec()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @property
    def out_dir(self) -> str:
        return self.run.out or out_dir()


def default_config() -> Config:
    """The XOR experiment: two features, two hidden neurons, learning rate 0.6, budget of 100 epochs."""
    return Config()


def parse_config(document: dict) -> Config:
    try:
        config = Config.model_validate(document)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    config.network_spec()
    return config


def load_config(path: Optional[str]) -> Config:
    if path is None:
        return default_config()
    try:
        with open(path, "r") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = parse_config(document)
    logger.info(f"Loaded config {path}: F={config.spec.features} H={config.spec.hidden}")
    return config
