"""Joint forward/reset agent training with example-based reset triggers."""

import ctypes as _ctypes

# The training loop allocates short-lived ~100KB float64 intermediates at a
# high rate; glibc's default trim threshold returns each one to the kernel
# and re-grows the heap, which dominates runtime. Keep the heap instead.
try:
    _ctypes.CDLL("libc.so.6").mallopt(-2, 1 << 30)  # M_TRIM_THRESHOLD
except (OSError, AttributeError):  # non-glibc platform; purely a speed knob
    pass

from .config import RunConfig, load_config
from .envs import make_env
from .forward_agent import ForwardAgent
from .reset_agent import ClassifierEnsemble, ResetAgent, classifier_ratio, discounted_success_oracle
from .baselines import LntResetAgent
from .orchestrator import evaluate_snapshot, init_train_state, run_training

__all__ = [
    "RunConfig",
    "load_config",
    "make_env",
    "ForwardAgent",
    "ResetAgent",
    "ClassifierEnsemble",
    "LntResetAgent",
    "classifier_ratio",
    "discounted_success_oracle",
    "evaluate_snapshot",
    "init_train_state",
    "run_training",
]
