"""Pipeline configuration: one schema-validated file, sectioned per stage.

Unknown keys are rejected anywhere in the tree so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .beamform import BeamformConfig
from .css import CssConfig
from .dereverb import WpeConfig
from .diarize import FusionConfig
from .errors import CalibrationMissing, ConfigInvalid
from .face_id import FaceIdConfig
from .localization import ArrayGeometry, SslConfig, circular_array_positions
from .signal_core import StftConfig


@dataclass(frozen=True)
class GeometrySection:
    radius_m: float = 0.0425
    n_perimeter: int = 6
    center_mic: bool = True
    speed_of_sound: float = 343.0

    def to_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(
            positions=circular_array_positions(self.radius_m, self.n_perimeter,
                                               self.center_mic),
            speed_of_sound=self.speed_of_sound)


@dataclass(frozen=True)
class WpeSection:
    enabled: bool = True
    prediction_delay: int = 2
    filter_taps: int = 10
    iterations: int = 2
    regularization: float = 1e-4
    block_len_s: float = 4.0

    def to_wpe_config(self) -> WpeConfig:
        return WpeConfig(prediction_delay=self.prediction_delay,
                         filter_taps=self.filter_taps,
                         iterations=self.iterations,
                         regularization=self.regularization,
                         block_len_s=self.block_len_s)


@dataclass(frozen=True)
class SslSection:
    grid_step_deg: float = 5.0
    prior_width_deg: float = 25.0
    epsilon: float = 0.01

    def to_ssl_config(self) -> SslConfig:
        return SslConfig(prior_width_deg=self.prior_width_deg, epsilon=self.epsilon)


@dataclass(frozen=True)
class SpeakerSection:
    c_guest: float = 0.3
    update_signatures: bool = True
    enroll_window_s: float = 1.5
    enroll_hop_s: float = 0.75


@dataclass(frozen=True)
class FaceSection:
    theta_new: float = 0.0
    negative_weight: float = 10.0
    percentile: float = 95.0
    gallery_cap: int = 50
    calibration_path: str | None = None

    def to_face_config(self) -> FaceIdConfig:
        return FaceIdConfig(theta_new=self.theta_new,
                            negative_weight=self.negative_weight,
                            percentile=self.percentile,
                            gallery_cap=self.gallery_cap)

    def load_calibration(self) -> tuple[float, float] | None:
        """Logistic calibration (a, b) from the configured JSON file; falls
        back to None (softmax posterior) when unconfigured or missing."""
        if self.calibration_path is None:
            return None
        try:
            with open(self.calibration_path) as f:
                obj = json.load(f)
            return float(obj["a"]), float(obj["b"])
        except (OSError, KeyError, ValueError) as e:
            raise CalibrationMissing(
                f"cannot load calibration from {self.calibration_path}: {e}") from e


@dataclass(frozen=True)
class RecognizerSection:
    flush_s: float = 0.3       # events close at silences longer than this
    max_event_s: float = 2.0   # cap keeps speaker-label latency bounded


@dataclass(frozen=True)
class IoSection:
    scene_dir: str | None = None


_SECTIONS = {
    "stft": StftConfig,
    "geometry": GeometrySection,
    "wpe": WpeSection,
    "css": CssConfig,
    "mvdr": BeamformConfig,
    "ssl": SslSection,
    "speaker": SpeakerSection,
    "face": FaceSection,
    "fusion": FusionConfig,
    "recognizer": RecognizerSection,
    "io": IoSection,
}


@dataclass(frozen=True)
class PipelineConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    wpe: WpeSection = field(default_factory=WpeSection)
    css: CssConfig = field(default_factory=CssConfig)
    mvdr: BeamformConfig = field(default_factory=BeamformConfig)
    ssl: SslSection = field(default_factory=SslSection)
    speaker: SpeakerSection = field(default_factory=SpeakerSection)
    face: FaceSection = field(default_factory=FaceSection)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    recognizer: RecognizerSection = field(default_factory=RecognizerSection)
    io: IoSection = field(default_factory=IoSection)

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        unknown = set(obj) - set(_SECTIONS)
        if unknown:
            raise ConfigInvalid(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            if name in obj:
                kwargs[name] = _build_section(section_cls, obj[name], name)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path) as f:
                obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"config file is not valid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name))
                for name in _SECTIONS}

    def replace_section(self, name: str, **changes) -> "PipelineConfig":
        section = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **{name: section})


def _build_section(section_cls, obj, name: str):
    if not isinstance(obj, dict):
        raise ConfigInvalid(f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(section_cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigInvalid(f"unknown keys in section {name!r}: {sorted(unknown)}")
    try:
        return section_cls(**obj)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(f"bad values in section {name!r}: {e}") from e


def write_default_config(path) -> None:
    with open(path, "w") as f:
        json.dump(PipelineConfig().to_dict(), f, sort_keys=True, indent=1)
