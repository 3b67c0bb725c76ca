"""Multitone PSK SWIPT simulator.

Plans intermodulation-free tone grids, encodes bits into tone phases,
rectifies the waveform through behavioral models, and demodulates the
second-order intermodulation phases.
"""
from .demod import DemodReport, ber, decide_symbols, decode_bits, demodulate, extract_tone_phases
from .errors import ConfigurationError, ConsistencyError, IntegrationError, SamplingError, TrialError
from .freqplan import FrequencyPlan, pair_differences, plan_frequencies, validate_plan
from .harness import SweepReport, TrialConfig, TrialReport, add_awgn, run_trial, sweep, throughput
from .modem_tx import (
    Constellation,
    SymbolStream,
    Waveform,
    build_constellation,
    encode_bits,
    papr,
    phases_from_symbols,
    synthesize,
)
from .phase_stats import (
    empirical_phase_histogram,
    irwin_hall_pdf,
    tone_phase_support,
    wrapped_phase_pdf,
)
from .rectifier import BasebandSignal, RectifierConfig, pce, rectify, rectify_diode, rectify_square_law

__version__ = "0.1.0"
