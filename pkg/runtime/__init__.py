"""
Realtime Audio VAE - Runtime Module
Block-wise streaming inference, throughput benchmark and timbre transfer
"""

from .stream import StreamState, stream_decode, stream_encode, stream_latency
from .bench import BenchReport, bench_throughput, single_band_config, speedup, host_info
from .transfer import TransferResult, timbre_transfer, mean_posterior_kl

__all__ = [
    'StreamState',
    'stream_decode',
    'stream_encode',
    'stream_latency',
    'BenchReport',
    'bench_throughput',
    'single_band_config',
    'speedup',
    'host_info',
    'TransferResult',
    'timbre_transfer',
    'mean_posterior_kl'
]
