"""Semantic HOI evaluation: WordNet-grounded soft matching, soft mAP / mF1,
LLM-ensemble similarity tables and agreement statistics."""

from .evaluation import EvalConfig, EvalReport, evaluate
from .matcher import Aggregator, BBox, HoiClass, HoiGroundTruth, HoiPrediction, match_image
from .metrics import soft_ap, standard_map
from .simtable import SimilarityTable
from .wordnet import Pos, SynsetId, WordnetGraph, load_wordnet

__version__ = "0.1.0"

__all__ = [
    "Aggregator",
    "BBox",
    "EvalConfig",
    "EvalReport",
    "HoiClass",
    "HoiGroundTruth",
    "HoiPrediction",
    "Pos",
    "SimilarityTable",
    "SynsetId",
    "WordnetGraph",
    "evaluate",
    "load_wordnet",
    "match_image",
    "soft_ap",
    "standard_map",
]
