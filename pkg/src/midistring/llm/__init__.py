"""Prompting, LLM backends, dataset generation and zero-shot recognition."""
from .backends import BackendError, CompletionRequest, LlmBackend, RemoteHttpBackend, ScriptedBackend
from .generate import GenerationRecord, generate_dataset, generate_song
from .mock import MockBackend, mock_backend
from .prompts import build_generation_prompt, build_recognition_prompt, temperature_for_index
from .recognize import Recognition, match_label, zero_shot_classify

__all__ = [
    "BackendError", "CompletionRequest", "LlmBackend", "RemoteHttpBackend", "ScriptedBackend",
    "GenerationRecord", "generate_dataset", "generate_song", "MockBackend", "mock_backend",
    "build_generation_prompt", "build_recognition_prompt", "temperature_for_index",
    "Recognition", "match_label", "zero_shot_classify",
]
