from .fig3 import run_fig3
from .glauber_check import run_glauber_check
from .herald_mc import run_herald_mc
from .oracle_check import run_oracle_check
from .stopband import run_stopband
from .tomography import run_tomography

__all__ = [
    "run_fig3",
    "run_glauber_check",
    "run_herald_mc",
    "run_oracle_check",
    "run_stopband",
    "run_tomography",
]
