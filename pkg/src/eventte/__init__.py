"""Information measures on asynchronous tick streams, from parsing to pair networks."""

__version__ = "0.1.0"

from .ingest import (ReturnSeries, SessionCalendar, TickEvent, TickSeries, parse_ticks,
                     to_returns)
from .series import (AlignedTuples, Alphabet, AlphabetSpec, BinnedSeries, LaggedTuples,
                     SymbolSequence, align_events, bin_returns, lagged_tuples, symbolize)
from .infotheory import (JointCounts, MeasureResult, conditional_entropy, entropy,
                         joint_entropy, mutual_information, shuffle_test,
                         transfer_entropy_binned, transfer_entropy_event)
from .analysis import (AnalysisConfig, PairMatrix, ThresholdRule, aggregates, daily_entropy,
                       extract_network, pair_matrices, pearson, sliding_pearson)

__all__ = [
    "ReturnSeries", "SessionCalendar", "TickEvent", "TickSeries", "parse_ticks", "to_returns",
    "AlignedTuples", "Alphabet", "AlphabetSpec", "BinnedSeries", "LaggedTuples",
    "SymbolSequence", "align_events", "bin_returns", "lagged_tuples", "symbolize",
    "JointCounts", "MeasureResult", "conditional_entropy", "entropy", "joint_entropy",
    "mutual_information", "shuffle_test", "transfer_entropy_binned", "transfer_entropy_event",
    "AnalysisConfig", "PairMatrix", "ThresholdRule", "aggregates", "daily_entropy",
    "extract_network", "pair_matrices", "pearson", "sliding_pearson",
]
