"""
Realtime Audio VAE - CLI Module
Commands, configuration files, checkpoints, latent files, WAV I/O and the synthetic corpus
"""

from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, capture, restore_model, restore_state
from .config_file import RunConfig, DataConfig, OutputConfig, parse_config, load_config, dump_config
from .corpus import CorpusSpec, generate_clip, generate_corpus, write_corpus, load_wav_folder
from .latent_file import LatentFile, read_latent_file, write_latent_file
from .wavio import read_wav, write_wav
from .main import main, build_parser, error_line, exit_code_for

__all__ = [
    'Checkpoint',
    'save_checkpoint',
    'load_checkpoint',
    'capture',
    'restore_model',
    'restore_state',
    'RunConfig',
    'DataConfig',
    'OutputConfig',
    'parse_config',
    'load_config',
    'dump_config',
    'CorpusSpec',
    'generate_clip',
    'generate_corpus',
    'write_corpus',
    'load_wav_folder',
    'LatentFile',
    'read_latent_file',
    'write_latent_file',
    'read_wav',
    'write_wav',
    'main',
    'build_parser',
    'error_line',
    'exit_code_for'
]
