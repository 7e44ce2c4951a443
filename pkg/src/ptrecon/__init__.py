"""Control-flow reconstruction attacks on frequency-annotated process trees."""
from .logio import EventLog, length_histogram, load_log, variant_distribution, write_log
from .metrics import EF, ef_f1, ef_relations, emd, evaluate, nhi, nmi, normalized_levenshtein
from .playout import Strategy, StrategyConfig, playout, run_experiment
from .ptree import (ProcessTree, concat_sets, enumerate_language, normalize_loop, parse_tree,
                    serialize_tree, shuffle_sets)
from .replay import annotate, fits, verify_annotation

__version__ = "0.1.0"
