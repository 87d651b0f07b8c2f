"""Case-based argumentation classifier over symbolic scene descriptions."""
from .aacbr import Casebase, Prediction, explain, explanation_moves, mine_attacks, mine_supports, predict
from .af import ArgumentationFramework, GroundedResult, Label, effective_attacks, grounded, to_dot
from .evaluate import Metrics, SearchSpace, ablate, evaluate, random_search
from .features import (
    AttributeVocabulary,
    Case,
    Characterisation,
    FeatureSelection,
    Kind,
    SelectionSpec,
    SuperFeature,
    characterise,
)
from .io import load_bundle, load_preset, parse_scenes, save_bundle
from .multiclass import BinaryModelConfig, TournamentConfig, predict_class, train_tournament
from .reduction import ClusteringConfig, reduce_casebase
from .synthetic import generate_synthetic, hans3_rules, hans7_rules

__version__ = "0.1.0"

__all__ = [
    "ArgumentationFramework", "AttributeVocabulary", "BinaryModelConfig", "Case", "Casebase",
    "Characterisation", "ClusteringConfig", "FeatureSelection", "GroundedResult", "Kind", "Label",
    "Metrics", "Prediction", "SearchSpace", "SelectionSpec", "SuperFeature", "TournamentConfig",
    "ablate", "characterise", "effective_attacks", "evaluate", "explain", "explanation_moves",
    "generate_synthetic", "grounded", "hans3_rules", "hans7_rules", "load_bundle", "load_preset",
    "mine_attacks", "mine_supports", "parse_scenes", "predict", "predict_class", "random_search",
    "reduce_casebase", "save_bundle", "to_dot", "train_tournament",
]
