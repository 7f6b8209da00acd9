# SpinLoop - Session Module
# Settings (tolerances, executor, pulse defaults) and the run log

from .settings import Settings, load_settings
from .run_log import RunLogger

__all__ = ['Settings', 'load_settings', 'RunLogger']
