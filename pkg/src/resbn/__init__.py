"""Mixed discrete/continuous Bayesian networks for reservoir parameter imputation."""
from resbn.data import Dataset, VariableSpec, default_schema, load_csv, load_reservoirs
from resbn.discretize import Discretizer, TableDiscretizer
from resbn.errors import (ConfigError, DataError, DegenerateRangeError, FitError, IllegalMoveError,
                          IncomparableError, ModelFormatError, ResbnError)
from resbn.graph import Dag, EdgeConstraints, graph_hamming
from resbn.infer import impute, sample
from resbn.learn import BayesNet, LearnConfig, fit_parameters, hill_climb, learn_network
from resbn.score import total_score
from resbn.similarity import MetricConfig, nearest_analogues

__version__ = "0.1.0"

__all__ = [
    "BayesNet", "ConfigError", "Dag", "DataError", "Dataset", "DegenerateRangeError", "Discretizer",
    "EdgeConstraints", "FitError", "IllegalMoveError", "IncomparableError", "LearnConfig", "MetricConfig",
    "ModelFormatError", "ResbnError", "TableDiscretizer", "VariableSpec", "default_schema", "fit_parameters",
    "graph_hamming", "hill_climb", "impute", "learn_network", "load_csv", "load_reservoirs",
    "nearest_analogues", "sample", "total_score",
]
