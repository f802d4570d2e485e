"""Synthetic scenes, toy detector, benchmark driver and CLI."""

from .bench import run_benchmark, write_report
from .config import BenchConfig, format_config, parse_config
from .detector import PipelineParams, make_pipeline_params, toy_detect
from .scene import SyntheticScene, synth_scene

__all__ = [
    "BenchConfig", "PipelineParams", "SyntheticScene", "format_config", "make_pipeline_params",
    "parse_config", "run_benchmark", "synth_scene", "toy_detect", "write_report",
]
