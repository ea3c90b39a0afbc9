"""srdpipe: streaming meeting transcription with continuous speech
separation, MVDR beamforming, and audio-visual speaker attribution."""

__version__ = "0.1.0"

from .signal_core import (AudioBuffer, StftConfig, MultichannelSpectrogram,
                          FeatureFrames, stft, istft, extract_features,
                          read_wav, write_wav)
from .localization import (ArrayGeometry, SteeringGrid, SslConfig,
                           ssl_loglik, per_frame_loglik, tracklet_ssl_likelihood)
from .dereverb import WpeConfig, dereverberate
from .css import (TfMaskSet, CssConfig, MaskProvider, OracleMaskProvider,
                  oracle_masks, align_permutation, run_css, stitch_chunks)
from .beamform import (Scm, BeamformConfig, estimate_scm, mvdr_weights,
                       run_beamformer, si_snr)
from .speaker_id import (VoiceSignature, speaker_loglik, update_signature,
                         enroll_signature)
from .face_id import (Tracklet, FaceIdConfig, IdentityClassifier,
                      FaceIdentifier, train_identity, score_tracklet,
                      face_posterior)
from .diarize import (Word, SpeechEvent, FusionConfig, SpeakerRegistry,
                      Diarizer, segment_event, attribute, commit)
from .pipeline import (AttributedTranscript, TranscriptRecord, MeetingInputs,
                       Providers, OracleRecognizer, OracleEmbeddingProvider,
                       oracle_providers, run_pipeline, run_pipeline_on_scene,
                       merge_streams)
from .scene_sim import SceneSpec, SceneOutput, simulate, standard_scenes
from .scoring import wer, score_transcript, attribution_accuracy, ScoringReport
from .config import PipelineConfig

__all__ = [
    "AudioBuffer", "StftConfig", "MultichannelSpectrogram", "FeatureFrames",
    "stft", "istft", "extract_features", "read_wav", "write_wav",
    "ArrayGeometry", "SteeringGrid", "SslConfig", "ssl_loglik",
    "per_frame_loglik", "tracklet_ssl_likelihood",
    "WpeConfig", "dereverberate",
    "TfMaskSet", "CssConfig", "MaskProvider", "OracleMaskProvider",
    "oracle_masks", "align_permutation", "run_css", "stitch_chunks",
    "Scm", "BeamformConfig", "estimate_scm", "mvdr_weights", "run_beamformer",
    "si_snr",
    "VoiceSignature", "speaker_loglik", "update_signature", "enroll_signature",
    "Tracklet", "FaceIdConfig", "IdentityClassifier", "FaceIdentifier",
    "train_identity", "score_tracklet", "face_posterior",
    "Word", "SpeechEvent", "FusionConfig", "SpeakerRegistry", "Diarizer",
    "segment_event", "attribute", "commit",
    "AttributedTranscript", "TranscriptRecord", "MeetingInputs", "Providers",
    "OracleRecognizer", "OracleEmbeddingProvider", "oracle_providers",
    "run_pipeline", "run_pipeline_on_scene", "merge_streams",
    "SceneSpec", "SceneOutput", "simulate", "standard_scenes",
    "wer", "score_transcript", "attribution_accuracy", "ScoringReport",
    "PipelineConfig",
]
