"""Change detection on revisited routes under global viewpoint uncertainty.

A view sequence map of local features is matched against individual query
frames: localization ranks reference frames by an asymmetric nearest-exemplar
distance over a learned visual vocabulary, and change likelihood is scored per
query feature against the retrieved references' binarized features, optionally
weighted by a motion prior learned from keypoint tracks.
"""

from .change_detection import (ChangeScore, ReferencePool, build_reference_pool,
                               detect_changes, likelihood_eq1, likelihood_eq3,
                               read_changes_csv, write_changes_csv)
from .config import RunConfig, apply_overrides, load_config, write_run_meta
from .errors import (ConfigurationError, FormatError, GenerationError,
                     LearningError, PairingError, RetrievalError, ScenediffError,
                     ScoringError, ValidationError)
from .evaluation import (BoxRank, ComparisonResult, GroundTruthBox, RankReport,
                         build_test_pairing, compare_methods, rank_changed_features,
                         read_gt_boxes_csv, read_report_csv, write_gt_boxes_csv,
                         write_plot_data_csv, write_report_csv)
from .features import (Frame, Keypoint, LocalFeature, OdometryPose,
                       ViewSequenceMap, wrap_heading)
from .localization import (BolcfIndex, LocalizationResult, build_index, localize,
                           nbnn_distance, read_index, write_index)
from .motion_prior import (EgoMotionSegmentLabel, MotionFeature, MotionVocabulary,
                           Track, anomaly_frame_ids, classify_motion,
                           detect_anomaly_ego_motion, extract_motion_features,
                           learn_motion_vocabulary, read_motion_vocabulary,
                           read_tracks_csv, select_keyframes,
                           write_motion_vocabulary, write_tracks_csv)
from .pipeline import (Models, QueryResult, build_map_index, learn_models,
                       localization_error, restrict_index, score_query)
from .plots import save_rank_error_figure, save_rank_report_figure
from .store import read_feature_store, write_feature_store
from .synthworld import (SynthWorld, WorldConfig, generate_curved_segment,
                         generate_world, read_query_anomaly_csv,
                         write_query_anomaly_csv, write_world)
from .vocabulary import (ProjectionDictionary, Vocabulary, binarize,
                         binarize_batch, hamming_distance, learn_vocabulary,
                         quantize, quantize_batch, read_vocabulary,
                         write_vocabulary)

__version__ = "0.1.0"

__all__ = [
    "BolcfIndex", "BoxRank", "ChangeScore", "ComparisonResult",
    "ConfigurationError", "EgoMotionSegmentLabel", "FormatError", "Frame",
    "GenerationError", "GroundTruthBox", "Keypoint", "LearningError",
    "LocalFeature", "LocalizationResult", "Models", "MotionFeature",
    "MotionVocabulary", "OdometryPose", "PairingError", "ProjectionDictionary",
    "QueryResult", "RankReport", "ReferencePool", "RetrievalError", "RunConfig",
    "ScenediffError", "ScoringError", "SynthWorld", "Track", "ValidationError",
    "ViewSequenceMap", "Vocabulary", "WorldConfig", "anomaly_frame_ids",
    "apply_overrides", "binarize", "binarize_batch", "build_index",
    "build_map_index", "build_reference_pool", "build_test_pairing",
    "classify_motion", "compare_methods", "detect_anomaly_ego_motion",
    "detect_changes", "extract_motion_features", "generate_curved_segment",
    "generate_world", "hamming_distance", "learn_models",
    "learn_motion_vocabulary", "learn_vocabulary", "likelihood_eq1",
    "likelihood_eq3", "load_config", "localization_error", "localize",
    "nbnn_distance", "quantize", "quantize_batch", "rank_changed_features",
    "read_changes_csv", "read_feature_store", "read_gt_boxes_csv", "read_index",
    "read_motion_vocabulary", "read_query_anomaly_csv", "read_report_csv",
    "read_tracks_csv", "read_vocabulary", "restrict_index",
    "save_rank_error_figure", "save_rank_report_figure", "score_query",
    "select_keyframes", "wrap_heading", "write_changes_csv",
    "write_feature_store", "write_gt_boxes_csv", "write_index",
    "write_motion_vocabulary", "write_plot_data_csv", "write_query_anomaly_csv",
    "write_report_csv", "write_run_meta", "write_tracks_csv",
    "write_vocabulary", "write_world",
]
