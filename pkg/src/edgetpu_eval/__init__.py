"""Edge-TPU-class accelerator performance modeling over NASBench-101 cells."""

__version__ = "0.1.0"
