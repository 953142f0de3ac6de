from gridnav.evalkit.dataset import (DatasetRecord, FrameStore,
                                     generate_dataset, label_count_table,
                                     load_index, split_records)
from gridnav.evalkit.metrics import (CategoryCounts, MetricsReport,
                                     eval_frames, match_points, mean_reports)
from gridnav.evalkit.render import render_overlay
from gridnav.evalkit.synthmaps import (SynthParams, generate_suite,
                                       generate_world, load_suite)
from gridnav.evalkit.tracked import (ExitRecorder, eval_tracked,
                                     make_net_detector, make_oracle_detector,
                                     run_online, score_tracked)
from gridnav.evalkit.training import (TrainConfig, TrainResult,
                                      TrainingDiverged, train)

__all__ = [
    "CategoryCounts", "DatasetRecord", "ExitRecorder", "FrameStore",
    "MetricsReport", "SynthParams", "TrainConfig", "TrainResult",
    "TrainingDiverged", "eval_frames", "eval_tracked", "generate_dataset",
    "generate_suite", "generate_world", "label_count_table", "load_index",
    "load_suite", "make_net_detector", "make_oracle_detector", "match_points",
    "mean_reports", "render_overlay", "run_online", "score_tracked",
    "split_records", "train",
]
