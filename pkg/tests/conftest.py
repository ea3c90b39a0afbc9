import numpy as np
import pytest

from srdpipe.config import PipelineConfig
from srdpipe.scene_sim import (SceneSpec, SpeakerSpec, UtteranceSpec, WordSpec,
                               _alternating_schedule, _overlapped_schedule,
                               simulate, standard_scenes)


@pytest.fixture(scope="session")
def config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def catalog():
    return standard_scenes()


@pytest.fixture(scope="session")
def free_field_scene():
    """Single plane-wave speaker, no reverb, no noise."""
    rng = np.random.default_rng(42)
    spec = SceneSpec(
        name="free-field", rt60_s=0.0, snr_db=None,
        speakers=(SpeakerSpec("a", 75.0, voice_seed=5, face_seed=6),),
        schedule=_alternating_schedule(rng, ["a"], 6.0, gap_s=0.2))
    return simulate(spec, seed=3)


def overlap_scene_spec(seed: int, duration: float = 6.0) -> SceneSpec:
    """Seeded two-speaker fully-overlapped scene with random azimuths."""
    rng = np.random.default_rng([900, seed])
    az1 = float(rng.uniform(0, 360))
    az2 = float((az1 + rng.uniform(60, 300)) % 360)
    return SceneSpec(
        name=f"overlap-{seed}", rt60_s=0.15, snr_db=25.0,
        speakers=(SpeakerSpec("a", round(az1, 2), voice_seed=1 + seed),
                  SpeakerSpec("b", round(az2, 2), voice_seed=100 + seed)),
        schedule=_overlapped_schedule(rng, ["a", "b"], duration))


@pytest.fixture(scope="session")
def overlap_scene():
    return simulate(overlap_scene_spec(0), seed=0)


@pytest.fixture(scope="session")
def turn_taking_scene(catalog):
    return simulate(catalog["turn-taking"], seed=11)


@pytest.fixture(scope="session")
def single_speaker_scene(catalog):
    return simulate(catalog["single-speaker"], seed=5)


@pytest.fixture(scope="session")
def meeting_scene(catalog):
    return simulate(catalog["four-speaker-meeting"], seed=7)


@pytest.fixture(scope="session")
def meeting_result(meeting_scene):
    from srdpipe.pipeline import run_pipeline_on_scene
    return run_pipeline_on_scene(meeting_scene)
