from .config import load_config
from .experiments import run_benchmark, run_correlate, run_generate, run_train

__all__ = ["load_config", "run_benchmark", "run_correlate", "run_generate", "run_train"]
